use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

use super::site::{content_type, FixtureSite};

/// Serves a fixture site's files over plain HTTP. Stops on drop.
pub struct FixtureServer {
    server: Arc<Server>,
    url: String,
    thread: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Binds `addr` (use port 0 for any free port).
    pub fn start(site: FixtureSite, addr: &str) -> std::io::Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(std::io::Error::other)?);
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("fixture server bound to a non-IP address"))?;
        let worker = Arc::clone(&server);
        let thread = std::thread::spawn(move || {
            for request in worker.incoming_requests() {
                let response = match site.resolve(request.url()) {
                    Some((path, body)) => {
                        let header = Header::from_bytes("Content-Type", content_type(path))
                            .expect("static header");
                        Response::from_string(body).with_header(header)
                    }
                    None => Response::from_string("not found").with_status_code(404),
                };
                let _ = request.respond(response);
            }
        });
        Ok(FixtureServer {
            server,
            url: format!("http://{bound}/"),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Blocks until the server is unblocked from another thread.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
