fn main() {
    std::process::exit(bird::cli::run(std::env::args_os()));
}
