fn main() {
    std::process::exit(sparse_lingam_cli::run());
}
