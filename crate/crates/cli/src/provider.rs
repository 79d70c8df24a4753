use rsa2_core::provider::{MockFixture, MockProvider, ProbabilityProvider, ReplayProvider};
use rsa2_http::HttpProvider;

use crate::config::{Config, ProviderKind};
use crate::error::{CliError, CliResult};

pub fn build(config: &Config) -> CliResult<Box<dyn ProbabilityProvider>> {
    let inner: Box<dyn ProbabilityProvider> = match config.provider {
        ProviderKind::Replay => {
            let cache = config.cache.as_ref().ok_or_else(|| CliError::Config("replay needs a cache".into()))?;
            return Ok(Box::new(ReplayProvider::replay(cache)?));
        }
        ProviderKind::Mock => match &config.mock_fixture {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Box::new(MockProvider::new(MockFixture::from_json(&text)?))
            }
            None => Box::new(MockProvider::symmetric()),
        },
        ProviderKind::Http => Box::new(HttpProvider::from_env().map_err(|e| CliError::Config(e.to_string()))?),
    };
    Ok(match &config.cache {
        Some(cache) => Box::new(ReplayProvider::record(inner, cache)?),
        None => inner,
    })
}
