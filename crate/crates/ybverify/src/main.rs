fn main() {
    std::process::exit(ybverify::run_cli());
}
