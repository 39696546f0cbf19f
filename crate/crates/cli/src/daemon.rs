//! The server daemon: accept loop, session threads, snapshot persistence on
//! rotation and on shutdown (SIGINT/SIGTERM).

use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use bamboo_core::server::EncryptedDatabase;
use bamboo_wire::EdbService;

use crate::client_ops::default_params;
use crate::config::ServerSettings;
use crate::CliError;

static SHUTDOWN: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_sig: libc::c_int) {
    SHUTDOWN.store(true, Ordering::SeqCst);
}

fn install_signal_handlers() {
    let handler = on_signal as extern "C" fn(libc::c_int) as *const () as libc::sighandler_t;
    unsafe {
        libc::signal(libc::SIGINT, handler);
        libc::signal(libc::SIGTERM, handler);
    }
}

const SNAPSHOT_FILE: &str = "bamboo.edb";
const IDENTITY_FILE: &str = "server.key";

fn load_or_create_identity(data_dir: &Path) -> Result<p256::SecretKey, CliError> {
    let path = data_dir.join(IDENTITY_FILE);
    if path.exists() {
        let bytes = std::fs::read(&path)
            .map_err(|e| CliError::State(format!("cannot read {}: {e}", path.display())))?;
        return p256::SecretKey::from_slice(&bytes)
            .map_err(|_| CliError::State(format!("corrupt identity key at {}", path.display())));
    }
    let key = p256::SecretKey::random(&mut rand::thread_rng());
    let bytes = key.to_bytes();
    write_private(&path, &bytes)?;
    Ok(key)
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut file = std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .mode(0o600)
        .open(path)
        .map_err(|e| CliError::State(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| CliError::State(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::State(format!("cannot write {}: {e}", path.display())))
}

fn persist(service: &EdbService, path: &Path) {
    let bytes = service.snapshot();
    let tmp = path.with_extension("tmp");
    let result = std::fs::write(&tmp, &bytes).and_then(|_| std::fs::rename(&tmp, path));
    match result {
        Ok(()) => eprintln!("persisted snapshot: epoch {}, {} entries", service.epoch(), service.len()),
        Err(e) => eprintln!("warning: failed to persist snapshot to {}: {e}", path.display()),
    }
}

pub fn cmd_serve(settings: &ServerSettings) -> Result<(), CliError> {
    std::fs::create_dir_all(&settings.data_dir)
        .map_err(|e| CliError::State(format!("cannot create {}: {e}", settings.data_dir.display())))?;
    let snapshot_path = settings.data_dir.join(SNAPSHOT_FILE);

    let edb = if snapshot_path.exists() {
        EncryptedDatabase::load(&snapshot_path)
            .map_err(|e| CliError::State(format!("cannot load {}: {e}", snapshot_path.display())))?
    } else {
        EncryptedDatabase::empty()
    };

    let identity = load_or_create_identity(&settings.data_dir)?;
    let service = Arc::new(
        EdbService::new(edb, default_params(), settings.workers)
            .with_static_key(identity)
            .with_max_body(settings.max_frame),
    );

    let listener = TcpListener::bind(&settings.listen)
        .map_err(|e| CliError::Network(format!("cannot bind {}: {e}", settings.listen)))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| CliError::Network(format!("listener setup failed: {e}")))?;

    install_signal_handlers();
    println!(
        "listening on {} (epoch {}, {} entries, {} rotation workers)",
        listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| settings.listen.clone()),
        service.epoch(),
        service.len(),
        settings.workers,
    );
    if let Some(fp) = service.fingerprint() {
        println!("fingerprint {}", hex::encode(fp));
    }

    let mut sessions: Vec<std::thread::JoinHandle<()>> = Vec::new();
    while !SHUTDOWN.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _peer)) => {
                stream.set_nodelay(true).ok();
                stream.set_read_timeout(Some(Duration::from_secs(60))).ok();
                let service = Arc::clone(&service);
                let snapshot_path = snapshot_path.clone();
                sessions.push(std::thread::spawn(move || {
                    match service.serve_connection(stream) {
                        Ok(summary) => {
                            if summary.rotations > 0 {
                                persist(&service, &snapshot_path);
                            }
                            if summary.overflows > 0 {
                                eprintln!(
                                    "warning: {} search(es) exceeded their pad target; \
                                     consider a larger a_max",
                                    summary.overflows
                                );
                            }
                        }
                        Err(e) => eprintln!("session error: {e}"),
                    }
                }));
                sessions.retain(|h| !h.is_finished());
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(25));
            }
            Err(e) => {
                eprintln!("accept error: {e}");
                std::thread::sleep(Duration::from_millis(100));
            }
        }
    }

    eprintln!("shutting down");
    for handle in sessions {
        let _ = handle.join();
    }
    persist(&service, &snapshot_path);
    Ok(())
}
