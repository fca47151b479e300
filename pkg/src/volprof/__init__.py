"""Volunteer engagement profiling from task-execution logs.

Pipeline: parse and filter a log (ingest), reconstruct working sessions and
timelines (sessions), compute engagement metrics (metrics), cluster with a
hierarchically seeded k-means and validate the partition (cluster), label
and account for the resulting profiles (profiles). A seeded synthetic corpus
generator (synth) provides planted ground truth, and the cli module wires
everything into the `volprof` command.
"""

from .errors import ConfigError, DataError, InvariantError, LogFormatError, VolprofError
from .ingest import (
    EligibilityPolicy,
    ParseReport,
    ProjectWindow,
    TaskEvent,
    derive_project_window,
    filter_participants,
    parse_log,
    parse_log_file,
)
from .sessions import (
    GapThreshold,
    Session,
    VolunteerTimeline,
    build_sessions,
    build_timeline,
    build_timelines,
    compute_gaps,
    detect_session_threshold,
    split_sessions,
)
from .metrics import (
    METRIC_COLUMNS,
    activity_ratio,
    daily_devoted_time,
    descriptive_stats,
    engagement_matrix,
    ks_normality,
    relative_activity_duration,
    variation_in_periodicity,
)
from .cluster import (
    ClusteringResult,
    Dendrogram,
    KScanReport,
    NormalizationParams,
    avg_silhouette,
    cut_to_centroids,
    denormalize,
    hierarchical_cluster,
    interpret_silhouette,
    kmeans,
    range_normalize,
    scan_k,
    seeded_kmeans,
    wss,
)
from .profiles import (
    CorrelationEntry,
    ImportanceRow,
    ProfileLabeling,
    importance_table,
    label_profiles,
    profile_correlations,
    profile_report,
    spearman,
)
from .synth import ArchetypeSpec, CorpusSpec, VolunteerPlan, generate_corpus, generate_volunteer

__version__ = "0.1.0"

__all__ = [
    "ArchetypeSpec",
    "ClusteringResult",
    "ConfigError",
    "CorpusSpec",
    "CorrelationEntry",
    "DataError",
    "Dendrogram",
    "EligibilityPolicy",
    "GapThreshold",
    "ImportanceRow",
    "InvariantError",
    "KScanReport",
    "LogFormatError",
    "METRIC_COLUMNS",
    "NormalizationParams",
    "ParseReport",
    "ProfileLabeling",
    "ProjectWindow",
    "Session",
    "TaskEvent",
    "VolprofError",
    "VolunteerPlan",
    "VolunteerTimeline",
    "activity_ratio",
    "avg_silhouette",
    "build_sessions",
    "build_timeline",
    "build_timelines",
    "compute_gaps",
    "cut_to_centroids",
    "daily_devoted_time",
    "denormalize",
    "derive_project_window",
    "descriptive_stats",
    "detect_session_threshold",
    "engagement_matrix",
    "filter_participants",
    "generate_corpus",
    "generate_volunteer",
    "hierarchical_cluster",
    "importance_table",
    "interpret_silhouette",
    "kmeans",
    "ks_normality",
    "label_profiles",
    "parse_log",
    "parse_log_file",
    "profile_correlations",
    "profile_report",
    "range_normalize",
    "relative_activity_duration",
    "scan_k",
    "seeded_kmeans",
    "spearman",
    "split_sessions",
    "variation_in_periodicity",
    "wss",
]
