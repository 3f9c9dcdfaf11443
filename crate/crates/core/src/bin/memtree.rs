fn main() {
    std::process::exit(memtree::cli::run(std::env::args_os()));
}
