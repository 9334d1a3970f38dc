fn main() {
    std::process::exit(ghz_router::harness::cli_main(std::env::args_os()));
}
