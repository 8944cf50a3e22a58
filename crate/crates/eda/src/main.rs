fn main() -> std::process::ExitCode {
    eda::cli::init_logging();
    std::process::ExitCode::from(eda::cli::run(std::env::args()))
}
