fn main() {
    std::process::exit(randembed::cli::dispatch(std::env::args_os()));
}
