fn main() {
    std::process::exit(pedal::cli::dispatch(std::env::args_os()));
}
