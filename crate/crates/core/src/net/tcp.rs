use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{read_frame, write_frame, Handler, NetError, Transport};

/// Accepts connections and answers one frame on each, a thread per
/// connection. A silent handler closes the connection without writing.
/// Stops after `limit` connections if given.
pub fn serve(listener: TcpListener, handler: Arc<dyn Handler>, limit: Option<usize>) -> std::io::Result<()> {
    let mut workers = Vec::new();
    for (i, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let handler = Arc::clone(&handler);
        workers.push(thread::spawn(move || {
            // a failing connection only affects its own client
            let _ = answer(stream, &*handler);
        }));
        if limit.is_some_and(|l| i + 1 >= l) {
            break;
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

fn answer(mut stream: TcpStream, handler: &dyn Handler) -> Result<(), NetError> {
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    let Some(msg) = read_frame(&mut stream)? else {
        return Ok(());
    };
    if let Some(reply) = handler.handle(&msg) {
        write_frame(&mut stream, &reply)?;
    }
    Ok(())
}

/// One connection per exchange.
#[derive(Debug, Clone)]
pub struct TcpTransport {
    addr: SocketAddr,
    timeout: Duration,
}

impl TcpTransport {
    pub fn new(addr: impl ToSocketAddrs) -> Result<Self, NetError> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| NetError::Malformed("address resolved to nothing".into()))?;
        Ok(TcpTransport {
            addr,
            timeout: Duration::from_secs(60),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Transport for TcpTransport {
    fn exchange(&mut self, msg: &[u8]) -> Result<Option<Vec<u8>>, NetError> {
        let mut stream = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        write_frame(&mut stream, msg)?;
        read_frame(&mut stream)
    }
}
