//! `cma`, the operator client.
//!
//! Every subcommand except `serve`, `rules lint` and `audit verify --file`
//! is one HTTP call. With `--json` the response body is written to stdout
//! unchanged.
//!
//! Exit codes: 0 success, 1 validation or state conflict, 2 authorization
//! or red line, 3 transport or server failure.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use cma_core::audit::verify_export;
use cma_core::governance::{constitution_pack, parse_pack, validate_hierarchy};
use cma_core::{ChainVerdict, GovernanceRule};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DENIED: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cma", version, about = "Operate a governed memory service")]
struct Cli {
    /// Base URL of the service.
    #[arg(long, env = "CMA_SERVER", default_value = "http://127.0.0.1:7878", global = true)]
    server: String,
    /// Bearer token.
    #[arg(long, env = "CMA_TOKEN", global = true, hide_env_values = true)]
    token: Option<String>,
    /// Print response bodies exactly as the API sent them.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Citizens and their lifecycle.
    Citizen {
        #[command(subcommand)]
        cmd: CitizenCmd,
    },
    /// Memory records.
    Mem {
        #[command(subcommand)]
        cmd: MemCmd,
    },
    /// Approval tickets.
    Gate {
        #[command(subcommand)]
        cmd: GateCmd,
    },
    Handover {
        #[command(subcommand)]
        cmd: HandoverCmd,
    },
    Inherit {
        #[command(subcommand)]
        cmd: InheritCmd,
    },
    Rules {
        #[command(subcommand)]
        cmd: RulesCmd,
    },
    Audit {
        #[command(subcommand)]
        cmd: AuditCmd,
    },
    /// Run the service in the foreground.
    Serve {
        #[arg(long, short)]
        config: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum CitizenCmd {
    Create {
        #[arg(long)]
        name: String,
        #[arg(long)]
        charter: String,
        /// Principal id for the first instance.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long = "knowledge")]
        knowledge: Vec<String>,
        /// Constitution pack, JSON Lines.
        #[arg(long)]
        pack: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
    },
    List,
    Show {
        id: String,
    },
    Fork {
        id: String,
        #[arg(long)]
        branch: String,
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Lists conflicts a merge would hit, or null.
    Conflicts {
        branch: String,
        #[arg(long)]
        into: String,
    },
    Merge {
        branch: String,
        #[arg(long)]
        into: String,
    },
    Depart {
        id: String,
        /// export, seal or destroy.
        #[arg(long)]
        disposition: String,
    },
    Departure {
        case: String,
    },
    Confirm {
        case: String,
        #[arg(long)]
        reaffirm: bool,
    },
    Cancel {
        case: String,
    },
}

#[derive(clap::Args, Debug)]
struct Trust {
    /// firsthand, reported or inferred.
    #[arg(long)]
    trust: Option<String>,
    /// Required with inferred trust.
    #[arg(long)]
    uncertainty: Option<String>,
}

impl Trust {
    fn to_json(&self) -> Option<Value> {
        if self.trust.is_none() && self.uncertainty.is_none() {
            return None;
        }
        let level = capitalize(self.trust.as_deref().unwrap_or("firsthand"));
        let mut v = json!({ "level": level });
        if let Some(u) = &self.uncertainty {
            v["uncertainty_tag"] = json!(u);
        }
        Some(v)
    }
}

#[derive(Subcommand, Debug)]
enum MemCmd {
    Append {
        citizen: String,
        #[arg(long)]
        tier: String,
        #[arg(long)]
        category: String,
        #[arg(long)]
        content: String,
        #[arg(long = "tag")]
        tags: Vec<String>,
        #[command(flatten)]
        trust: Trust,
    },
    Show {
        id: String,
    },
    Correct {
        id: String,
        #[arg(long)]
        content: String,
        /// Replaces the target's tags when given.
        #[arg(long = "tag")]
        tags: Vec<String>,
        #[command(flatten)]
        trust: Trust,
    },
    Recall {
        citizen: String,
        #[arg(long = "term")]
        terms: Vec<String>,
        #[arg(long = "tag")]
        tags: Vec<String>,
        #[arg(long = "tier")]
        tiers: Vec<String>,
        #[arg(long)]
        as_of: Option<String>,
    },
    Forget {
        id: String,
    },
    Unforget {
        id: String,
    },
    Revive {
        id: String,
    },
    Weight {
        id: String,
        weight: f64,
    },
    Consent {
        id: String,
    },
    Distill {
        citizen: String,
        #[arg(long = "source", required = true)]
        sources: Vec<String>,
        #[arg(long)]
        category: String,
        #[arg(long)]
        content: String,
        #[arg(long = "tag")]
        tags: Vec<String>,
        #[command(flatten)]
        trust: Trust,
    },
    /// Destroys a record under an approved ticket, or opens that ticket
    /// with --request.
    Destroy {
        id: String,
        #[arg(long, conflicts_with = "request")]
        ticket: Option<String>,
        #[arg(long)]
        consent: Option<String>,
        #[arg(long)]
        request: bool,
    },
    Transfer {
        citizen: String,
        #[arg(long)]
        category: String,
        #[arg(long)]
        to: String,
    },
}

#[derive(Subcommand, Debug)]
enum GateCmd {
    List {
        #[arg(long)]
        risk: Option<String>,
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        citizen: Option<String>,
    },
    Show {
        id: String,
    },
    Approve {
        id: String,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    Reject {
        id: String,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    /// Runs an approved ticket whose cooling-off has elapsed.
    Execute {
        id: String,
    },
}

#[derive(Subcommand, Debug)]
enum HandoverCmd {
    /// Files a handover note read from a JSON file ("-" for stdin).
    Compose {
        citizen: String,
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum InheritCmd {
    Begin {
        citizen: String,
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    Show {
        case: String,
    },
    /// Submits answers and a pattern citation from a JSON file.
    Verify {
        case: String,
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum RulesCmd {
    List,
    /// Registers a rule draft read from a JSON file.
    Add {
        #[arg(long)]
        file: PathBuf,
    },
    /// Checks a local pack for hierarchy conflicts. Needs no server.
    Lint {
        file: PathBuf,
        /// Leave out the shipped constitution rules.
        #[arg(long)]
        no_shipped: bool,
    },
}

#[derive(Subcommand, Debug)]
enum AuditCmd {
    /// Verifies the server's chain, or a local log or export with --file.
    Verify {
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long, conflicts_with_all = ["from", "to"])]
        file: Option<PathBuf>,
    },
    Replay {
        #[arg(long)]
        at: String,
    },
    Export {
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        anchored: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Method {
    Get,
    Post,
    Delete,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Render {
    Pretty,
    Verdict,
    Raw,
}

#[derive(Debug)]
struct Call {
    method: Method,
    path: String,
    query: Vec<(String, String)>,
    body: Option<Value>,
    render: Render,
    /// Where a raw body goes instead of stdout.
    out_file: Option<PathBuf>,
}

impl Call {
    fn get(path: String) -> Self {
        Self { method: Method::Get, path, query: Vec::new(), body: None, render: Render::Pretty, out_file: None }
    }

    fn post(path: String, body: Value) -> Self {
        Self { method: Method::Post, path, query: Vec::new(), body: Some(body), render: Render::Pretty, out_file: None }
    }

    fn delete(path: String) -> Self {
        Self { method: Method::Delete, path, query: Vec::new(), body: None, render: Render::Pretty, out_file: None }
    }

    fn query(mut self, k: &str, v: Option<impl ToString>) -> Self {
        if let Some(v) = v {
            self.query.push((k.to_string(), v.to_string()));
        }
        self
    }

    fn mutating(&self) -> bool {
        self.method != Method::Get && !self.path.ends_with("/recall")
    }
}

/// A failure before or instead of an HTTP exchange.
struct Local {
    exit: i32,
    code: &'static str,
    message: String,
}

impl Local {
    fn invalid(message: impl Into<String>) -> Self {
        Self { exit: EXIT_VALIDATION, code: "InvalidRequest", message: message.into() }
    }
}

struct Out<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    json: bool,
}

impl Out<'_> {
    fn fail(&mut self, l: Local) -> i32 {
        if self.json {
            let body = json!({ "code": l.code, "message": l.message });
            let _ = self.out.write_all(body.to_string().as_bytes());
        } else {
            let _ = writeln!(self.err, "error: {}: {}", l.code, l.message);
        }
        l.exit
    }

    fn value(&mut self, v: &Value) {
        if self.json {
            let _ = self.out.write_all(v.to_string().as_bytes());
        } else {
            let _ = writeln!(self.out, "{}", serde_json::to_string_pretty(v).expect("value serializes"));
        }
    }
}

pub fn exit_for_status(status: u16) -> i32 {
    match status {
        200..=299 => EXIT_OK,
        401 | 403 | 423 => EXIT_DENIED,
        400..=499 => EXIT_VALIDATION,
        _ => EXIT_TRANSPORT,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_VALIDATION
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let mut o = Out { out, err, json: cli.json };
    let call = match plan(cli.cmd, &mut o) {
        Ok(Some(call)) => call,
        Ok(None) => return EXIT_OK,
        Err(Ok(code)) => return code,
        Err(Err(l)) => return o.fail(l),
    };
    let token = cli.token.filter(|t| !t.trim().is_empty());
    if call.mutating() && token.is_none() {
        return o.fail(Local::invalid("a token is required (--token or CMA_TOKEN)"));
    }
    send(&cli.server, token.as_deref(), call, &mut o)
}

/// Outcome of planning: an HTTP call, nothing more to do, or an exit.
type Planned = Result<Option<Call>, Result<i32, Local>>;

fn plan(cmd: Cmd, o: &mut Out<'_>) -> Planned {
    let call = match cmd {
        Cmd::Citizen { cmd } => citizen(cmd)?,
        Cmd::Mem { cmd } => mem(cmd)?,
        Cmd::Gate { cmd } => gate(cmd),
        Cmd::Handover { cmd: HandoverCmd::Compose { citizen, file } } => {
            let note = read_json(&file)?;
            Call::post(format!("/citizens/{citizen}/handover"), json!({ "note": note }))
        }
        Cmd::Inherit { cmd } => match cmd {
            InheritCmd::Begin { citizen, instance, model } => {
                let mut body = json!({});
                set(&mut body, "instance_id", instance);
                set(&mut body, "model_label", model);
                Call::post(format!("/citizens/{citizen}/inheritance"), body)
            }
            InheritCmd::Show { case } => Call::get(format!("/inheritance/{case}")),
            InheritCmd::Verify { case, file } => Call::post(format!("/inheritance/{case}/verify"), read_json(&file)?),
        },
        Cmd::Rules { cmd } => match cmd {
            RulesCmd::List => Call::get("/rules".into()),
            RulesCmd::Add { file } => Call::post("/rules".into(), read_json(&file)?),
            RulesCmd::Lint { file, no_shipped } => return Err(Ok(lint(&file, no_shipped, o))),
        },
        Cmd::Audit { cmd } => match cmd {
            AuditCmd::Verify { file: Some(file), .. } => return Err(Ok(verify_local(&file, o))),
            AuditCmd::Verify { from, to, file: None } => Call {
                render: Render::Verdict,
                ..Call::get("/audit/verify".into()).query("from", from).query("to", to)
            },
            AuditCmd::Replay { at } => Call::get("/audit/replay".into()).query("at", Some(at)),
            AuditCmd::Export { from, to, anchored, out } => {
                Call {
                    render: Render::Raw,
                    out_file: out,
                    ..Call::get("/audit/export".into())
                        .query("from", from)
                        .query("to", to)
                        .query("anchored", anchored.then_some(true))
                }
            }
        },
        Cmd::Serve { config } => return Err(Ok(serve(&config, o))),
    };
    Ok(Some(call))
}

fn citizen(cmd: CitizenCmd) -> Result<Call, Result<i32, Local>> {
    Ok(match cmd {
        CitizenCmd::Create { name, charter, instance, knowledge, pack, model } => {
            let mut body = json!({
                "identity": { "name": name, "charter_text": charter },
                "shared_knowledge": knowledge,
            });
            if let Some(p) = pack {
                let text = read_text(&p)?;
                let rules = parse_pack(&text).map_err(|e| Err(Local::invalid(e.to_string())))?;
                body["constitution_pack"] = serde_json::to_value(rules).expect("rules serialize");
            }
            set(&mut body, "instance_id", instance);
            set(&mut body, "model_label", model);
            Call::post("/citizens".into(), body)
        }
        CitizenCmd::List => Call::get("/citizens".into()),
        CitizenCmd::Show { id } => Call::get(format!("/citizens/{id}")),
        CitizenCmd::Fork { id, branch, instance, model } => {
            let mut body = json!({ "branch_name": branch });
            set(&mut body, "instance_id", instance);
            set(&mut body, "model_label", model);
            Call::post(format!("/citizens/{id}/fork"), body)
        }
        CitizenCmd::Conflicts { branch, into } => {
            Call::get(format!("/citizens/{branch}/merge-conflicts")).query("target", Some(into))
        }
        CitizenCmd::Merge { branch, into } => Call::post(format!("/citizens/{branch}/merge"), json!({ "target": into })),
        CitizenCmd::Depart { id, disposition } => Call::post(
            format!("/citizens/{id}/departure"),
            json!({ "disposition": capitalize(&disposition) }),
        ),
        CitizenCmd::Departure { case } => Call::get(format!("/departure/{case}")),
        CitizenCmd::Confirm { case, reaffirm } => {
            Call::post(format!("/departure/{case}/confirm"), json!({ "reaffirm": reaffirm }))
        }
        CitizenCmd::Cancel { case } => Call::delete(format!("/departure/{case}")),
    })
}

fn mem(cmd: MemCmd) -> Result<Call, Result<i32, Local>> {
    Ok(match cmd {
        MemCmd::Append { citizen, tier, category, content, tags, trust } => {
            let mut body = json!({ "tier": tier, "category": category, "content": content, "tags": tags });
            set(&mut body, "trust", trust.to_json());
            Call::post(format!("/citizens/{citizen}/memories"), body)
        }
        MemCmd::Show { id } => Call::get(format!("/memories/{id}")),
        MemCmd::Correct { id, content, tags, trust } => {
            let mut body = json!({ "content": content });
            set(&mut body, "tags", (!tags.is_empty()).then_some(tags));
            set(&mut body, "trust", trust.to_json());
            Call::post(format!("/memories/{id}/corrections"), body)
        }
        MemCmd::Recall { citizen, terms, tags, tiers, as_of } => {
            let mut body = json!({});
            set(&mut body, "terms", (!terms.is_empty()).then_some(terms));
            set(&mut body, "tags", (!tags.is_empty()).then_some(tags));
            set(&mut body, "tiers", (!tiers.is_empty()).then_some(tiers));
            set(&mut body, "as_of", as_of);
            Call::post(format!("/citizens/{citizen}/recall"), body)
        }
        MemCmd::Forget { id } => Call::post(format!("/memories/{id}/forget"), json!({})),
        MemCmd::Unforget { id } => Call::post(format!("/memories/{id}/unforget"), json!({})),
        MemCmd::Revive { id } => Call::post(format!("/memories/{id}/revive"), json!({})),
        MemCmd::Weight { id, weight } => Call::post(format!("/memories/{id}/recall-weight"), json!({ "weight": weight })),
        MemCmd::Consent { id } => Call::post(format!("/memories/{id}/consent"), json!({})),
        MemCmd::Distill { citizen, sources, category, content, tags, trust } => {
            let mut body = json!({ "source_ids": sources, "category": category, "content": content, "tags": tags });
            set(&mut body, "trust", trust.to_json());
            Call::post(format!("/citizens/{citizen}/distill"), body)
        }
        MemCmd::Destroy { id, ticket, consent, request } => {
            if ticket.is_none() && !request {
                return Err(Err(Local {
                    exit: EXIT_DENIED,
                    code: "TicketNotApproved",
                    message: format!("destroying {id} needs an approved ticket; open one with --request"),
                }));
            }
            let mut body = json!({});
            set(&mut body, "ticket_id", ticket);
            set(&mut body, "consent_id", consent);
            Call::post(format!("/memories/{id}/destroy"), body)
        }
        MemCmd::Transfer { citizen, category, to } => Call::post(
            format!("/citizens/{citizen}/ownership-transfer"),
            json!({ "category": category, "new_writer": to }),
        ),
    })
}

fn gate(cmd: GateCmd) -> Call {
    match cmd {
        GateCmd::List { risk, state, citizen } => Call::get("/gate/tickets".into())
            .query("risk", risk.map(|r| r.to_uppercase()))
            .query("state", state.map(|s| capitalize(&s)))
            .query("citizen", citizen),
        GateCmd::Show { id } => Call::get(format!("/gate/tickets/{id}")),
        GateCmd::Approve { id, rationale } => decision(id, "Approve", rationale),
        GateCmd::Reject { id, rationale } => decision(id, "Reject", rationale),
        GateCmd::Execute { id } => Call::post(format!("/gate/tickets/{id}/execute"), json!({})),
    }
}

fn decision(id: String, verdict: &str, rationale: String) -> Call {
    Call::post(format!("/gate/tickets/{id}/decision"), json!({ "verdict": verdict, "rationale": rationale }))
}

fn set<T: serde::Serialize>(body: &mut Value, key: &str, v: Option<T>) {
    if let Some(v) = v {
        body[key] = serde_json::to_value(v).expect("value serializes");
    }
}

fn capitalize(s: &str) -> String {
    let lower = s.to_lowercase();
    let mut c = lower.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn read_text(path: &Path) -> Result<String, Result<i32, Local>> {
    let mut text = String::new();
    let res = if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Err(Local::invalid(format!("{}: {e}", path.display()))))?;
    Ok(text)
}

fn read_json(path: &Path) -> Result<Value, Result<i32, Local>> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Err(Local::invalid(format!("{}: {e}", path.display()))))
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

/// Performs the call; returns status and body bytes.
fn exchange(server: &str, token: Option<&str>, call: &Call) -> Result<(u16, Vec<u8>), String> {
    let url = format!("{}{}", server.trim_end_matches('/'), call.path);
    let agent = agent();
    let auth = token.map(|t| format!("Bearer {t}"));
    let resp = match call.method {
        Method::Get | Method::Delete => {
            let mut req = if call.method == Method::Get { agent.get(&url) } else { agent.delete(&url) };
            for (k, v) in &call.query {
                req = req.query(k, v);
            }
            if let Some(a) = &auth {
                req = req.header("Authorization", a);
            }
            req.call()
        }
        Method::Post => {
            let mut req = agent.post(&url);
            for (k, v) in &call.query {
                req = req.query(k, v);
            }
            if let Some(a) = &auth {
                req = req.header("Authorization", a);
            }
            req.send_json(call.body.as_ref().unwrap_or(&Value::Null))
        }
    };
    let mut resp = resp.map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let bytes = resp.body_mut().with_config().limit(u64::MAX).read_to_vec().map_err(|e| e.to_string())?;
    Ok((status, bytes))
}

fn send(server: &str, token: Option<&str>, call: Call, o: &mut Out<'_>) -> i32 {
    let (status, bytes) = match exchange(server, token, &call) {
        Ok(r) => r,
        Err(e) => return o.fail(Local { exit: EXIT_TRANSPORT, code: "Transport", message: e }),
    };
    let code = exit_for_status(status);
    if code != EXIT_OK {
        if o.json {
            let _ = o.out.write_all(&bytes);
        } else {
            match serde_json::from_slice::<cma_server::ErrorBody>(&bytes) {
                Ok(b) => {
                    let red = b.red_line_id.map(|r| format!(" (red line {r})")).unwrap_or_default();
                    let _ = writeln!(o.err, "error: {}: {}{red}", b.code, b.message);
                }
                Err(_) => {
                    let _ = writeln!(o.err, "error: HTTP {status}: {}", String::from_utf8_lossy(&bytes));
                }
            }
        }
        return code;
    }
    match call.render {
        Render::Raw => match &call.out_file {
            Some(path) => match std::fs::write(path, &bytes) {
                Ok(()) => EXIT_OK,
                Err(e) => o.fail(Local::invalid(format!("{}: {e}", path.display()))),
            },
            None => {
                let _ = o.out.write_all(&bytes);
                EXIT_OK
            }
        },
        _ if o.json && call.render != Render::Verdict => {
            let _ = o.out.write_all(&bytes);
            EXIT_OK
        }
        Render::Verdict => match serde_json::from_slice::<ChainVerdict>(&bytes) {
            Ok(v) => {
                if o.json {
                    let _ = o.out.write_all(&bytes);
                } else {
                    print_verdict(v, o);
                }
                verdict_exit(v)
            }
            Err(e) => o.fail(Local { exit: EXIT_TRANSPORT, code: "BadResponse", message: e.to_string() }),
        },
        Render::Pretty => {
            match serde_json::from_slice::<Value>(&bytes) {
                Ok(v) => o.value(&v),
                Err(_) => {
                    let _ = o.out.write_all(&bytes);
                }
            }
            EXIT_OK
        }
    }
}

fn print_verdict(v: ChainVerdict, o: &mut Out<'_>) {
    let _ = match v {
        ChainVerdict::Ok { events } => writeln!(o.out, "Ok: {events} events verified"),
        ChainVerdict::FirstBad { seq } => writeln!(o.out, "FirstBad seq {seq}"),
    };
}

fn verdict_exit(v: ChainVerdict) -> i32 {
    if v.is_ok() {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

/// Verifies a log or export on disk. A directory means its `audit.jsonl`.
fn verify_local(path: &Path, o: &mut Out<'_>) -> i32 {
    let file = if path.is_dir() { path.join("audit.jsonl") } else { path.to_path_buf() };
    let bytes = match std::fs::read(&file) {
        Ok(b) => b,
        Err(e) => return o.fail(Local::invalid(format!("{}: {e}", file.display()))),
    };
    let v = verify_export(&bytes);
    if o.json {
        let _ = o.out.write_all(serde_json::to_string(&v).expect("verdict serializes").as_bytes());
    } else {
        print_verdict(v, o);
    }
    verdict_exit(v)
}

fn lint(path: &Path, no_shipped: bool, o: &mut Out<'_>) -> i32 {
    let text = match read_text(path) {
        Ok(t) => t,
        Err(Err(l)) => return o.fail(l),
        Err(Ok(c)) => return c,
    };
    let specs = match parse_pack(&text) {
        Ok(s) => s,
        Err(e) => return o.fail(Local { exit: EXIT_VALIDATION, code: "PackParse", message: e.to_string() }),
    };
    let mut rules: Vec<GovernanceRule> = if no_shipped { Vec::new() } else { constitution_pack() };
    rules.extend(specs.into_iter().map(GovernanceRule::from_spec));
    let violations = validate_hierarchy(&rules);
    if o.json {
        let _ = o.out.write_all(serde_json::to_string(&violations).expect("violations serialize").as_bytes());
    } else if violations.is_empty() {
        let _ = writeln!(o.out, "ok: {} rules, no conflicts", rules.len());
    } else {
        for v in &violations {
            let _ = writeln!(o.out, "void {}: conflicts with {}: {}", v.lower_rule_id, v.upper_rule_id, v.reason);
        }
    }
    if violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn serve(config: &Path, o: &mut Out<'_>) -> i32 {
    use cma_server::ServeError;
    let cfg = match cma_server::ServiceConfig::load(config) {
        Ok(c) => c,
        Err(e) => return o.fail(Local::invalid(e.to_string())),
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return o.fail(Local { exit: EXIT_TRANSPORT, code: "Runtime", message: e.to_string() }),
    };
    match rt.block_on(cma_server::serve(cfg)) {
        Ok(()) => EXIT_OK,
        Err(e @ ServeError::ChainCorrupt { .. }) => o.fail(Local { exit: EXIT_VALIDATION, code: "ChainCorrupt", message: e.to_string() }),
        Err(e @ ServeError::AddressInUse(_)) => o.fail(Local { exit: EXIT_TRANSPORT, code: "AddressInUse", message: e.to_string() }),
        Err(e @ ServeError::Config(_)) => o.fail(Local::invalid(e.to_string())),
        Err(e) => o.fail(Local { exit: EXIT_TRANSPORT, code: "ServeFailed", message: e.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_map_to_exit_codes() {
        let cases = [(200, 0), (201, 0), (202, 0), (400, 1), (404, 1), (409, 1), (401, 2), (403, 2), (423, 2), (500, 3)];
        for (status, code) in cases {
            assert_eq!(exit_for_status(status), code, "{status}");
        }
    }

    #[test]
    fn enum_words_are_normalized() {
        assert_eq!(capitalize("inferred"), "Inferred");
        assert_eq!(capitalize("SEAL"), "Seal");
        assert_eq!(capitalize(""), "");
    }

    #[test]
    fn recall_is_a_read() {
        assert!(!Call::post("/citizens/x/recall".into(), json!({})).mutating());
        assert!(Call::post("/citizens/x/memories".into(), json!({})).mutating());
        assert!(Call::delete("/departure/x".into()).mutating());
    }
}
