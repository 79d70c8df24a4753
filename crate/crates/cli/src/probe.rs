use rsa2_core::provider::ProviderRequest;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::pretty;
use crate::provider;

/// Sends one raw request, e.g. `{"kind": "loglik", "prefix": "He said \"", "continuation": "Hi."}`,
/// and prints the response.
pub fn execute(config: &Config, request: &str) -> CliResult<()> {
    config.validate()?;
    let request: ProviderRequest =
        serde_json::from_str(request).map_err(|e| CliError::Config(format!("request: {e}")))?;
    let provider = provider::build(config)?;
    let response = provider.request(&request)?;
    let value = serde_json::json!({
        "provider": provider.name(),
        "request_hash": request.hash(),
        "response": response,
    });
    print!("{}", pretty(&value));
    Ok(())
}
