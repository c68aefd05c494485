fn main() {
    std::process::exit(reloc_opt::cli::run_command(std::env::args_os()));
}
