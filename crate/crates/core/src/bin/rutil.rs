fn main() {
    std::process::exit(rationale_utility::cli::run());
}
