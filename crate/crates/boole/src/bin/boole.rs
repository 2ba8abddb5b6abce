fn main() {
    std::process::exit(boole::cli::main_with_args(std::env::args_os()));
}
