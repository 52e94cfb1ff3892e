fn main() {
    std::process::exit(sparse_confset_cli::run(std::env::args_os()));
}
