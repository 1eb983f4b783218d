use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match streetvae_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                // Help and version requests land here too.
                clap_err.exit();
            }
            log::error!("{err:#}");
            ExitCode::from(streetvae_cli::exit_code(&err) as u8)
        }
    }
}
