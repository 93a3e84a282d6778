fn main() {
    std::process::exit(csbattery::cli::run_from(std::env::args_os()));
}
