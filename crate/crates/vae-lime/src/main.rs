fn main() {
    std::process::exit(vae_lime::cli::run());
}
