fn main() {
    std::process::exit(maxstab::cli::main());
}
