fn main() {
    std::process::exit(minwise_lab::cli::main());
}
