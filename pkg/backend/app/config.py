from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="BILANZ_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Project
    project_name: str = "bilanz"
    debug: bool = False
    log_format: str = "json"  # json or text

    # Statement validation (relative tolerance)
    tolerance: float = 1e-3

    # Mining defaults
    seed: int = 42
    bins: int = 3
    k_clusters: int = 3
    min_support: str = "0.2"  # fraction ("0.2") or absolute count ("3")
    min_confidence: float = 0.6
    max_iterations: int = 100

    # Scoring
    x4_fallback: bool = False

    # Reporting
    top_n_rules: int = 5
    report_formats: str = "json"  # comma separated: json,csv,md
    owl_mode: str = "merged"  # merged or per_firm
    output_dir: Optional[str] = None

    # Per-firm stages
    workers: int = 1


settings = Settings()
