fn main() {
    std::process::exit(sabia::cli::run(std::env::args_os()));
}
