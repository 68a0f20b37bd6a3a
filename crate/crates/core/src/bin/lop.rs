fn main() {
    std::process::exit(lop::cli::cli_main(std::env::args_os()));
}
