fn main() {
    std::process::exit(evdenoise::cli::run());
}
