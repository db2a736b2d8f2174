fn main() {
    std::process::exit(spotmask_cli::dispatch(std::env::args_os()));
}
