fn main() {
    std::process::exit(vimae::cli::dispatch(std::env::args()));
}
