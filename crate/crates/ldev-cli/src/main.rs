fn main() {
    std::process::exit(ldev_cli::run_main());
}
