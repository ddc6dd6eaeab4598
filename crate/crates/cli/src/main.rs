fn main() {
    std::process::exit(eisrank::run(std::env::args_os()));
}
