fn main() {
    std::process::exit(magnls::app::main_with_args(std::env::args_os()));
}
