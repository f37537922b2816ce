use pgsynth_api::{ErrorKind, RunRequest};
use pgsynth_client::{Client, ClientError};

async fn start() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(pgsynth_server::serve(listener));
    Client::new(format!("http://{addr}/"))
}

#[tokio::test]
async fn talks_to_a_live_server() {
    let c = start().await;
    assert_eq!(c.health().await.unwrap().status, "ok");
    let model = c.gen_cs(1).await.unwrap();
    let req = RunRequest { model, approach: "canonical".into(), synthesize: true, ..Default::default() };
    let r = c.solve(&req).await.unwrap();
    assert_eq!(r.stats.realizable, Some(true));
    assert!(r.strategy.is_some());
    let b = c.build(&req).await.unwrap();
    assert_eq!(b.stats.realizable, None);
    let solved = pgsynth_api::Stats { realizable: None, ..r.stats.without_timing() };
    assert_eq!(b.stats.without_timing(), solved);
}

#[tokio::test]
async fn api_errors_are_decoded() {
    let c = start().await;
    let err = c.gen_cs(0).await.unwrap_err();
    match err {
        ClientError::Api { status, body } => {
            assert_eq!(status, 400);
            assert_eq!(body.kind, ErrorKind::Input);
        }
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let c = Client::new(format!("http://{addr}"));
    assert!(matches!(c.health().await, Err(ClientError::Transport(_))));
}
