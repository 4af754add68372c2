//! Annotation service: hands out Q&A questions about dataset images,
//! turns the answers into labels, and appends them to an event store.
//!
//! Routes:
//! - `GET  /api/datasets`
//! - `POST /api/session` `{qtype, I, dataset?, seed?}` -> `201 {session_id, total}`
//! - `GET  /api/question?session=` -> question payload, or `204` when done
//! - `POST /api/answer` `{session, instance_id, answer}` -> `{qa_label}`
//! - `GET  /api/stats?session=` -> `{answered, remaining, label_size_histogram}`

mod png;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use qa_label::data::{EventWriter, ImageDataset};
use qa_label::labeling::derive_seed;
use qa_label::{Answer, ClassId, QuestionSpec, QuestionType};

pub use axum::http::HeaderValue;
pub use session::QuestionPayload;
use session::{AnswerError, Session};

/// A dataset served under a name, with optional display names per class.
#[derive(Clone, Debug)]
pub struct DatasetEntry {
    pub dataset: Arc<ImageDataset>,
    pub class_names: Option<Vec<String>>,
    ids: Arc<Vec<String>>,
    index_of: Arc<HashMap<String, usize>>,
}

impl DatasetEntry {
    /// Instance ids are row positions.
    pub fn new(dataset: ImageDataset) -> Self {
        let ids = dataset.instance_ids();
        Self::with_ids(dataset, ids).expect("row positions are unique")
    }

    /// Uses `ids[i]` as the id of row `i`, e.g. the row in a source file
    /// the dataset was subsampled from.
    pub fn with_ids(dataset: ImageDataset, ids: Vec<String>) -> qa_label::Result<Self> {
        if ids.len() != dataset.len() {
            return Err(qa_label::Error::ShapeMismatch(format!(
                "{} ids for {} instances",
                ids.len(),
                dataset.len()
            )));
        }
        let index_of: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        if index_of.len() != ids.len() {
            return Err(qa_label::Error::InvalidArgument(
                "instance ids are not unique".into(),
            ));
        }
        Ok(Self {
            dataset: Arc::new(dataset),
            class_names: None,
            ids: Arc::new(ids),
            index_of: Arc::new(index_of),
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = Some(names);
        self
    }

    pub(crate) fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub(crate) fn index(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }
}

struct Inner {
    datasets: HashMap<String, DatasetEntry>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    store: Option<Mutex<EventWriter>>,
    seed: u64,
    sessions_created: AtomicU64,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Without a store path, answers are labeled but not persisted. With
    /// one, every dataset must share the same number of classes.
    pub fn new(
        datasets: HashMap<String, DatasetEntry>,
        store: Option<&Path>,
        seed: u64,
    ) -> qa_label::Result<Self> {
        for (name, entry) in &datasets {
            if let Some(names) = &entry.class_names {
                if names.len() != entry.dataset.space.k() {
                    return Err(qa_label::Error::InvalidArgument(format!(
                        "dataset `{name}`: {} class names for {} classes",
                        names.len(),
                        entry.dataset.space.k()
                    )));
                }
            }
        }
        let store = match store {
            None => None,
            Some(path) => {
                let mut spaces = datasets.values().map(|e| e.dataset.space);
                let space = spaces.next().ok_or_else(|| {
                    qa_label::Error::InvalidArgument("no datasets to serve".into())
                })?;
                if spaces.any(|s| s != space) {
                    return Err(qa_label::Error::InvalidArgument(
                        "datasets sharing a store must have the same number of classes".into(),
                    ));
                }
                Some(Mutex::new(EventWriter::open(path, space)?))
            }
        };
        Ok(Self(Arc::new(Inner {
            datasets,
            sessions: RwLock::new(HashMap::new()),
            store,
            seed,
            sessions_created: AtomicU64::new(0),
        })))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.0
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

impl From<AnswerError> for ApiError {
    fn from(e: AnswerError) -> Self {
        match e {
            AnswerError::UnknownInstance(m) => ApiError::new(StatusCode::NOT_FOUND, m),
            AnswerError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, m),
            AnswerError::Protocol(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m),
            AnswerError::Store(m) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, m),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    qtype: QuestionType,
    #[serde(rename = "I")]
    items: usize,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SessionCreated {
    session_id: String,
    seed: u64,
    total: usize,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    session: String,
    instance_id: String,
    answer: Answer,
}

#[derive(Debug, Serialize)]
struct AnswerResponse {
    qa_label: Vec<ClassId>,
}

#[derive(Debug, Serialize)]
struct Stats {
    answered: usize,
    remaining: usize,
    label_size_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Serialize)]
struct DatasetInfo {
    name: String,
    #[serde(rename = "K")]
    k: usize,
    n: usize,
    class_names: Option<Vec<String>>,
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    let mut out: Vec<DatasetInfo> = state
        .0
        .datasets
        .iter()
        .map(|(name, e)| DatasetInfo {
            name: name.clone(),
            k: e.dataset.space.k(),
            n: e.dataset.len(),
            class_names: e.class_names.clone(),
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Json(out)
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let name = match req.dataset {
        Some(name) => name,
        None if state.0.datasets.len() == 1 => state
            .0
            .datasets
            .keys()
            .next()
            .cloned()
            .expect("one dataset"),
        None => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "`dataset` is required",
            ))
        }
    };
    let entry =
        state.0.datasets.get(&name).ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, format!("unknown dataset `{name}`"))
        })?;
    let spec = QuestionSpec::new(req.qtype, req.items, entry.dataset.space)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let seed = req.seed.unwrap_or_else(|| {
        let n = state.0.sessions_created.fetch_add(1, Ordering::Relaxed);
        derive_seed(state.0.seed, n)
    });
    let session = Session::new(spec, entry.clone(), seed);
    let total = session.total();
    let id = uuid::Uuid::new_v4().simple().to_string();
    state
        .0
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, dataset = %name, qtype = %req.qtype, items = req.items, seed, "session created");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: id,
            seed,
            total,
        }),
    ))
}

async fn get_question(
    State(state): State<AppState>,
    query: Result<Query<SessionQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let session = state.session(&q.session)?;
    let mut session = session.lock().expect("session poisoned");
    match session.current_question() {
        Some(payload) => Ok(Json(payload).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn post_answer(
    State(state): State<AppState>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<AnswerResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let session = state.session(&req.session)?;
    let mut session = session.lock().expect("session poisoned");
    let label = session.answer(&req.instance_id, req.answer, |event| match &state.0.store {
        Some(store) => store
            .lock()
            .expect("store poisoned")
            .append(std::slice::from_ref(event)),
        None => Ok(()),
    })?;
    Ok(Json(AnswerResponse {
        qa_label: label.as_slice().to_vec(),
    }))
}

async fn get_stats(
    State(state): State<AppState>,
    query: Result<Query<SessionQuery>, QueryRejection>,
) -> Result<Json<Stats>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let session = state.session(&q.session)?;
    let session = session.lock().expect("session poisoned");
    Ok(Json(Stats {
        answered: session.answered(),
        remaining: session.remaining(),
        label_size_histogram: session.histogram().clone(),
    }))
}

/// The API router. `cors_origin` restricts cross-origin access to one
/// origin; `None` allows any.
pub fn router(state: AppState, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/datasets", get(list_datasets))
        .route("/api/session", post(create_session))
        .route("/api/question", get(get_question))
        .route("/api/answer", post(post_answer))
        .route("/api/stats", get(get_stats))
        .layer(cors)
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "annotation server listening");
    axum::serve(listener, app).await
}
