fn main() {
    std::process::exit(qopt::cli::run());
}
