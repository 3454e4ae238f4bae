//! The HTTP score provider against an in-process mock service.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use roomsplat::remote::RemoteProvider;
use roomsplat_core::diffusion::wire::{ScoreRequest, ScoreResponse};
use roomsplat_core::diffusion::{
    AnalyticProvider, Codec, CondRole, ConditionSet, NoiseSchedule, ProviderError, ScheduleKind, ScoreProvider, Stage,
    Tensor,
};
use roomsplat_core::seeded_rng;

type Handler = dyn Fn(&[u8]) -> (u16, Vec<u8>) + Send + Sync;

/// Serves `POST /score` on a loopback port, one request per connection.
fn serve(handler: Arc<Handler>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let (status, reply) = handler(&body);
            let head = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/octet-stream\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                reply.len()
            );
            let _ = stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(&reply));
        }
    });
    format!("http://{addr}")
}

fn schedule() -> NoiseSchedule {
    NoiseSchedule::new(1000, ScheduleKind::LINEAR).unwrap()
}

fn f32_tensor(c: usize, h: usize, w: usize, rng: &mut roomsplat_core::Rng) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| StandardNormal.sample(&mut *rng)).map(|v| v as f32 as f64)
}

fn analytic(stage: Stage, h: usize, w: usize, seed: u64) -> AnalyticProvider {
    let mut rng = seeded_rng(seed, 1);
    let c = stage.latent_channels();
    let (mu_y, mu_null) = (f32_tensor(c, h, w, &mut rng), f32_tensor(c, h, w, &mut rng));
    let mix: Vec<f64> = (0..c * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    AnalyticProvider::new(stage, schedule(), Codec::Identity, mu_y, mu_null).unwrap().with_mix(CondRole::Semantic, mix).unwrap()
}

/// Mock backend: the analytic provider behind the wire.
fn analytic_service(provider: AnalyticProvider) -> String {
    serve(Arc::new(move |body: &[u8]| {
        let reply = match ScoreRequest::decode(body) {
            Ok(req) => match provider.predict(req.stage, &req.z_t, req.t as usize, &req.cond) {
                Ok(eps) => ScoreResponse::Ok(eps),
                Err(e) => ScoreResponse::Error { status: 2, message: e.to_string() },
            },
            Err(e) => ScoreResponse::Error { status: 1, message: e.to_string() },
        };
        (200, reply.encode().unwrap())
    }))
}

fn remote(url: &str, stage: Stage) -> RemoteProvider {
    RemoteProvider::new(url, stage, schedule(), Codec::Identity, Duration::from_secs(10)).unwrap()
}

fn request(stage: Stage, h: usize, w: usize, rng: &mut roomsplat_core::Rng) -> (Tensor, ConditionSet) {
    let z = f32_tensor(stage.latent_channels(), h, w, rng);
    let sem = f32_tensor(3, h, w, rng);
    let cond = match stage {
        Stage::Geometry => ConditionSet::new(sem, None, None, rng.random()),
        Stage::Appearance => ConditionSet::new(sem, Some(f32_tensor(3, h, w, rng)), Some(f32_tensor(1, h, w, rng)), rng.random()),
    };
    (z, cond.unwrap())
}

#[test]
fn remote_matches_local_analytic_over_100_requests() {
    let (h, w) = (5, 7);
    let mut rng = seeded_rng(42, 0);
    let mut worst = 0.0f64;
    for stage in [Stage::Geometry, Stage::Appearance] {
        let local = analytic(stage, h, w, 7);
        let remote = remote(&analytic_service(local.clone()), stage);
        for _ in 0..50 {
            let (z, cond) = request(stage, h, w, &mut rng);
            let t = rng.random_range(1..=1000);
            let got = remote.predict(stage, &z, t, &cond).unwrap();
            let want = local.predict(stage, &z, t, &cond).unwrap();
            // The wire carries f32, so the service's answer is the local one
            // rounded once.
            assert_eq!(got, want.map(|v| v as f32 as f64), "stage {stage:?} t {t}");
            let rel = got.data().iter().zip(want.data()).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-6, "relative wire error {worst:e}");
}

#[test]
fn wrong_channel_count_is_a_shape_error() {
    let url = serve(Arc::new(|_: &[u8]| (200, ScoreResponse::Ok(Tensor::zeros(2, 4, 4)).encode().unwrap())));
    let (z, cond) = request(Stage::Appearance, 4, 4, &mut seeded_rng(1, 0));
    let err = remote(&url, Stage::Appearance).predict(Stage::Appearance, &z, 10, &cond).unwrap_err();
    assert!(matches!(err, ProviderError::Shape { expected: (3, 4, 4), actual: (2, 4, 4), .. }), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let (z, cond) = request(Stage::Geometry, 2, 2, &mut seeded_rng(2, 0));
    let err = remote(&format!("http://127.0.0.1:{port}"), Stage::Geometry).predict(Stage::Geometry, &z, 10, &cond).unwrap_err();
    assert!(err.is_transport(), "{err}");
}

#[test]
fn slow_service_times_out_as_transport_error() {
    let url = serve(Arc::new(|_: &[u8]| {
        std::thread::sleep(Duration::from_millis(1500));
        (200, Vec::new())
    }));
    let p = RemoteProvider::new(&url, Stage::Geometry, schedule(), Codec::Identity, Duration::from_millis(200)).unwrap();
    let (z, cond) = request(Stage::Geometry, 2, 2, &mut seeded_rng(3, 0));
    let err = p.predict(Stage::Geometry, &z, 10, &cond).unwrap_err();
    assert!(err.is_transport(), "{err}");
}

#[test]
fn error_frame_becomes_remote_error() {
    let frame = ScoreResponse::Error { status: 7, message: "backend offline".into() }.encode().unwrap();
    let url = serve(Arc::new(move |_: &[u8]| (503, frame.clone())));
    let (z, cond) = request(Stage::Geometry, 2, 2, &mut seeded_rng(4, 0));
    let err = remote(&url, Stage::Geometry).predict(Stage::Geometry, &z, 10, &cond).unwrap_err();
    assert_eq!(err, ProviderError::Remote { status: 7, message: "backend offline".into() });
}

#[test]
fn malformed_replies_are_protocol_errors() {
    let ok = ScoreResponse::Ok(Tensor::zeros(6, 2, 2)).encode().unwrap();
    let replies: [(u16, Vec<u8>); 3] = [(200, b"not a frame".to_vec()), (500, ok.clone()), (200, ok[..ok.len() - 3].to_vec())];
    for (status, body) in replies {
        let url = serve(Arc::new(move |_: &[u8]| (status, body.clone())));
        let (z, cond) = request(Stage::Geometry, 2, 2, &mut seeded_rng(5, 0));
        let err = remote(&url, Stage::Geometry).predict(Stage::Geometry, &z, 10, &cond).unwrap_err();
        assert!(matches!(err, ProviderError::Protocol(_)), "{err}");
    }
}

#[test]
fn other_stage_is_refused_locally() {
    let p = remote("http://127.0.0.1:9", Stage::Geometry);
    let (z, cond) = request(Stage::Appearance, 2, 2, &mut seeded_rng(6, 0));
    assert_eq!(p.predict(Stage::Appearance, &z, 10, &cond).unwrap_err(), ProviderError::UnsupportedStage(Stage::Appearance));
}
