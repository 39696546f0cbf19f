//! Client subcommand implementations: thin compositions of the core client
//! operations and a wire session.

use std::io::BufRead;
use std::net::TcpStream;
use std::path::Path;

use bamboo_core::client::{Client, PaddingPolicy};
use bamboo_core::{CoreError, FileId, GroupParams, Op};
use bamboo_wire::error::code;
use bamboo_wire::{ClientSession, WireError};

use crate::config::ClientSettings;
use crate::CliError;

pub fn default_params() -> GroupParams {
    bamboo_core::pgen(128, 128).expect("default parameters are valid")
}

pub fn cmd_init(state: &Path, a_max: u64, x: u64) -> Result<(), CliError> {
    let mut rng = rand::thread_rng();
    Client::create(state, default_params(), a_max, x, &mut rng).map_err(|e| match e {
        CoreError::InvalidParams(m) => CliError::Usage(m.to_string()),
        CoreError::Io(ref io) if io.kind() == std::io::ErrorKind::AlreadyExists => {
            CliError::State(format!("state file {} already exists", state.display()))
        }
        other => CliError::from(other),
    })?;
    println!("initialized {} (a_max={a_max}, x={x})", state.display());
    Ok(())
}

fn open_client(settings: &ClientSettings) -> Result<Client, CliError> {
    let client = Client::open(&settings.state, default_params()).map_err(|e| match e {
        CoreError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => CliError::State(
            format!("no state file at {} (run `bamboo init` first)", settings.state.display()),
        ),
        other => CliError::from(other),
    })?;
    if client.pending_rotation().is_some() {
        return Err(CliError::State(
            "a key rotation is in flight; run `bamboo rotate` to complete it".into(),
        ));
    }
    Ok(client)
}

fn connect(settings: &ClientSettings) -> Result<ClientSession<TcpStream>, CliError> {
    let stream = TcpStream::connect(&settings.server)
        .map_err(|e| CliError::Network(format!("cannot reach {}: {e}", settings.server)))?;
    stream.set_nodelay(true).ok();
    let mut session = ClientSession::new(stream);
    if let Some(fp) = settings.fingerprint {
        session.pin_server(fp);
    }
    Ok(session)
}

pub fn cmd_update(
    settings: &ClientSettings,
    op: Op,
    keyword: &str,
    id_hex: &str,
) -> Result<(), CliError> {
    let mut client = open_client(settings)?;
    let id = parse_id(client.params(), id_hex)?;
    let mut session = connect(settings)?;
    let mut rng = rand::thread_rng();
    let ct = client.data_update(op, keyword, &id, &mut rng)?;
    session.data_update(client.epoch(), &ct)?;
    Ok(())
}

pub fn cmd_search(
    settings: &ClientSettings,
    keyword: &str,
    policy: PaddingPolicy,
) -> Result<(), CliError> {
    let client = open_client(settings)?;
    let mut rng = rand::thread_rng();
    let td = match client.trapdoor(keyword, policy, &mut rng) {
        Err(CoreError::UnknownKeyword) => {
            // Never contact the server for a keyword we never updated.
            return Err(CliError::State("unknown keyword".into()));
        }
        other => other?,
    };
    let mut session = connect(settings)?;
    let components = session.search(&td)?;
    let live = client.decrypt_results(keyword, &components)?;
    let mut out = String::new();
    for id in &live {
        out.push_str(&id.to_hex());
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

pub fn cmd_rotate(settings: &ClientSettings, if_idle: Option<u64>) -> Result<(), CliError> {
    let mut client = Client::open(&settings.state, default_params()).map_err(|e| match e {
        CoreError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => CliError::State(
            format!("no state file at {} (run `bamboo init` first)", settings.state.display()),
        ),
        other => CliError::from(other),
    })?;

    let resuming = client.pending_rotation().is_some();
    if resuming {
        eprintln!("resuming an interrupted key rotation");
    } else if let Some(idle_secs) = if_idle {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let last = client.last_op().unwrap_or(0);
        if now.saturating_sub(last) < idle_secs {
            println!("skipped: last operation {}s ago (< {idle_secs}s idle)", now.saturating_sub(last));
            return Ok(());
        }
    }

    let old_epoch = client.epoch();
    let token = match client.pending_rotation() {
        Some(token) => token.clone(),
        None => {
            let mut rng = rand::thread_rng();
            client.begin_key_update(&mut rng)?
        }
    };

    let mut session = connect(settings)?;
    match session.key_update(&token) {
        Ok(_) => {}
        // The server is already past this token: a previous run delivered it
        // but crashed before finalizing locally.
        Err(WireError::Remote { code: code::EPOCH_MISMATCH, epoch, .. })
            if resuming && epoch >= token.new_epoch => {}
        Err(e) => {
            // Keep the pending token for resume; a later `rotate` retries.
            return Err(CliError::from(e));
        }
    }
    let new_epoch = client.finalize_key_update()?;
    println!("epoch {old_epoch} -> {new_epoch}");
    Ok(())
}

pub fn cmd_ingest(settings: &ClientSettings, file: &Path) -> Result<(), CliError> {
    let mut client = open_client(settings)?;
    let reader = std::io::BufReader::new(std::fs::File::open(file).map_err(|e| {
        CliError::State(format!("cannot read {}: {e}", file.display()))
    })?);
    let mut session = connect(settings)?;
    let mut rng = rand::thread_rng();
    let mut count = 0u64;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::State(format!("read error: {e}")))?;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((keyword, id_hex)) = line.split_once('\t') else {
            return Err(CliError::State(format!(
                "{}:{}: expected `keyword<TAB>hex-id`",
                file.display(),
                lineno + 1
            )));
        };
        let id = parse_id(client.params(), id_hex).map_err(|e| {
            CliError::State(format!("{}:{}: {}", file.display(), lineno + 1, e.message()))
        })?;
        let ct = client.data_update(Op::Add, keyword, &id, &mut rng)?;
        session.data_update(client.epoch(), &ct)?;
        count += 1;
    }
    println!("ingested {count} entries");
    Ok(())
}

fn parse_id(params: &GroupParams, id_hex: &str) -> Result<FileId, CliError> {
    FileId::from_hex(params, id_hex)
        .map_err(|e| CliError::Usage(format!("invalid identifier {id_hex:?}: {e}")))
}
