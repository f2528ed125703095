fn main() {
    std::process::exit(vgmt::cli::run(std::env::args_os()));
}
