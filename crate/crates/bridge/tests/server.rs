use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use negotiate_bridge::{router, Body, ServerOptions, WireMessage};
use negotiate_core::harness::default_model;
use negotiate_core::hlc::Phase;
use negotiate_core::{Profile, RobotRole};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

async fn start(options: ServerOptions) -> SocketAddr {
    let model = tokio::task::spawn_blocking(|| default_model(&Profile::default()).unwrap()).await.unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(model, options)).await.unwrap() });
    addr
}

async fn health(addr: SocketAddr) -> serde_json::Value {
    let mut tcp = TcpStream::connect(addr).await.unwrap();
    tcp.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut buf = String::new();
    tcp.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    serde_json::from_str(buf.split("\r\n\r\n").nth(1).unwrap()).unwrap()
}

async fn next_message<S>(ws: &mut S) -> WireMessage
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("no message").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return WireMessage::from_json(&t).unwrap();
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_session_over_a_socket() {
    let addr = start(ServerOptions { speed: 2.0, ..Default::default() }).await;
    let h = health(addr).await;
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["sessions"], 0);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let send = |m: WireMessage| Message::Text(m.to_json().into());
    ws.send(send(WireMessage::new("", 1, Body::Join))).await.unwrap();
    let first = next_message(&mut ws).await;
    assert!(matches!(first.body, Body::SessionSnapshot(_)));
    let id = first.session.clone();
    assert!(!id.is_empty());
    assert_eq!(health(addr).await["sessions"], 1);

    ws.send(Message::Text("{garbage".into())).await.unwrap();
    let set = Body::SetConfig { robot: Some(RobotRole::Hard(0)), seed: Some(7), speed: None };
    ws.send(send(WireMessage::new(id.clone(), 2, set))).await.unwrap();

    let mut seq = 2;
    let mut saw_error = false;
    let mut saw_disagreement = false;
    let mut last_seq = first.seq;
    let mut sent_at = tokio::time::Instant::now();
    while !saw_disagreement {
        if sent_at.elapsed() > Duration::from_millis(40) {
            seq += 1;
            ws.send(send(WireMessage::new(id.clone(), seq, Body::HumanForce { fx: 0.0, fy: 12.0 }))).await.unwrap();
            sent_at = tokio::time::Instant::now();
        }
        let m = next_message(&mut ws).await;
        assert!(m.seq > last_seq);
        last_seq = m.seq;
        assert_eq!(m.session, id);
        match m.body {
            Body::Error { .. } => saw_error = true,
            Body::SessionSnapshot(s) => {
                assert!(s.t < 3.0, "no disagreement by t = {}", s.t);
                saw_disagreement = s.phase == Phase::Disagreement;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(saw_error);

    ws.close(None).await.unwrap();
    for _ in 0..100 {
        if health(addr).await["sessions"] == 0 {
            return;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("session not released");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_are_isolated() {
    let addr = start(ServerOptions { speed: 4.0, ..Default::default() }).await;
    let (mut a, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let (mut b, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    a.send(Message::Text(WireMessage::new("", 1, Body::Join).to_json().into())).await.unwrap();
    let ida = next_message(&mut a).await.session;
    b.send(Message::Text(WireMessage::new("", 1, Body::Join).to_json().into())).await.unwrap();
    let idb = next_message(&mut b).await.session;
    assert_ne!(ida, idb);
    assert_eq!(health(addr).await["sessions"], 2);
    // pausing one leaves the other running
    a.send(Message::Text(WireMessage::new(ida, 2, Body::Pause { paused: true }).to_json().into())).await.unwrap();
    tokio::time::sleep(Duration::from_millis(100)).await;
    let mut b_times = Vec::new();
    while b_times.len() < 3 {
        if let Body::SessionSnapshot(s) = next_message(&mut b).await.body {
            b_times.push(s.t);
        }
    }
    assert!(b_times.windows(2).all(|w| w[1] > w[0]));
}
