fn main() {
    std::process::exit(smctrl::cli::run(std::env::args_os()));
}
