"""Railway defect inspection engine: synthetic instruct-data generation,
prompt composition, multimodal backend routing, an instant-feedback
fine-tune loop, and an evaluation harness, all runnable offline against a
deterministic mock backend."""

from .backends import (
    Backend,
    Completion,
    FinetuneJob,
    HttpBackend,
    MockBackend,
    SamplingParams,
    build_backend,
    chat,
    count_tokens,
    embed,
    execute_finetune,
)
from .config import EngineConfig, RoleModels, load_config
from .dataset import (
    CaptionRecord,
    DatasetEntry,
    GenerationPolicy,
    SyntheticSample,
    caption_image,
    compile_dataset,
    complexity_score,
    diversity,
    is_unique,
    objective,
    reconstruction_loss,
    rephrase_caption,
)
from .feedback import (
    Feedback,
    LoopConfig,
    LoopDeps,
    LoopState,
    parse_feedback,
    run_loop,
    should_finetune,
    step,
    update_satisfaction,
    update_system,
)
from .inference import (
    ConsumableResponse,
    MultimodalInput,
    infer,
    process,
    route,
    sample_frames,
)
from .metrics import (
    LatencyRecord,
    MetricsReport,
    PredictionRecord,
    RougeResult,
    auc_ovr,
    classification_metrics,
    latency_report,
    relevance,
    rouge_l,
    usefulness,
)
from .prompts import ComposedPrompt, SystemMessage, VpiRule, compose, match_vpi
from .service import EngineService

__version__ = "0.1.0"
