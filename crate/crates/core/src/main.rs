fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(insertion_meta::cli_dispatch(&argv));
}
