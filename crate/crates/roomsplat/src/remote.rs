//! Score provider backed by an HTTP service speaking the binary frames.
//!
//! Each prediction is one `POST {endpoint}/score` whose body is an `SCR1`
//! frame; the reply body is an `EPS1` frame. Connection and I/O failures are
//! transport errors, anything wrong with a reply is a contract error. There
//! are no retries.

use std::time::Duration;

use roomsplat_core::diffusion::wire::{ScoreRequest, ScoreResponse};
use roomsplat_core::diffusion::{Codec, ConditionSet, NoiseSchedule, ProviderError, ScoreProvider, Stage, Tensor};

/// Replies larger than this are rejected.
const MAX_REPLY: u64 = 256 << 20;

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    url: String,
    stage: Stage,
    schedule: NoiseSchedule,
    codec: Codec,
    agent: ureq::Agent,
}

impl RemoteProvider {
    /// `endpoint` is the service base URL, e.g. `http://127.0.0.1:8000`.
    pub fn new(endpoint: &str, stage: Stage, schedule: NoiseSchedule, codec: Codec, timeout: Duration) -> Result<Self, ProviderError> {
        if schedule.steps() > u16::MAX as usize {
            return Err(ProviderError::Protocol(format!("schedule length {} does not fit the frame", schedule.steps())));
        }
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        let url = format!("{}/score", endpoint.trim_end_matches('/'));
        Ok(Self { url, stage, schedule, codec, agent })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn exchange(&self, frame: &[u8]) -> Result<(u16, Vec<u8>), ProviderError> {
        let transport = |e: ureq::Error| match e {
            ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
                ProviderError::Transport(format!("{}: {e}", self.url))
            }
            e => ProviderError::Protocol(format!("{}: {e}", self.url)),
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/octet-stream")
            .send(frame)
            .map_err(transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().with_config().limit(MAX_REPLY).read_to_vec().map_err(transport)?;
        Ok((status, body))
    }
}

impl ScoreProvider for RemoteProvider {
    fn supports(&self, stage: Stage) -> bool {
        stage == self.stage
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn codec(&self) -> Codec {
        self.codec
    }

    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        if stage != self.stage {
            return Err(ProviderError::UnsupportedStage(stage));
        }
        let t16 = u16::try_from(t).map_err(|_| ProviderError::Timestep { t, max: self.schedule.steps() })?;
        let request = ScoreRequest {
            stage,
            steps: self.schedule.steps() as u16,
            t: t16,
            c: 0,
            z_t: z_t.clone(),
            cond: cond.clone(),
        };
        let frame = request.encode().map_err(|e| ProviderError::Protocol(format!("request: {e}")))?;
        let (status, body) = self.exchange(&frame)?;
        let reply = ScoreResponse::decode(&body)
            .map_err(|e| ProviderError::Protocol(format!("reply (HTTP {status}): {e}")))?;
        let eps = match reply {
            ScoreResponse::Ok(eps) if status == 200 => eps,
            ScoreResponse::Ok(_) => return Err(ProviderError::Protocol(format!("HTTP {status} with a success frame"))),
            ScoreResponse::Error { status, message } => return Err(ProviderError::Remote { status, message }),
        };
        if eps.shape() != z_t.shape() {
            return Err(ProviderError::Shape { what: "remote prediction", expected: z_t.shape(), actual: eps.shape() });
        }
        Ok(eps)
    }
}
