"""Re-identification risk analytics for tap-on/tap-off transport data.

Quantifies how identifying longitudinal smart-card records are (sampled
set uniqueness across time granularities), finds co-travellers, runs
constraint-refinement re-identification queries and allocation audits,
and produces the privacy-preserving aggregate release that should be
published instead.
"""

from .core import (
    EventKind,
    EventSignature,
    MissingOffEvent,
    Period,
    TapDataError,
    TapEvent,
    TimeGranularity,
    UnknownCard,
    make_signature,
    truncate_time,
)
from .cotravel import CoTravelMatch, cotravel_on_date, cotravellers
from .index import Bin, SignatureCalendar, build_calendar, load_calendar, save_calendar
from .ingest import (
    EventStore,
    RecordError,
    SyntheticPopulationConfig,
    build_store,
    generate_population,
    load_directory,
    load_store,
    parse_events,
    write_events,
)
from .query import (
    CandidateSet,
    CardTimeline,
    GapRecord,
    card_timeline,
    card_type_census,
    evaluate,
    id_gap_scan,
    refine,
)
from .release import (
    AggregateTable,
    CardLevel,
    EventLevel,
    PrivacyParams,
    add_noise,
    aggregate_counts,
    private_release,
)
from .unicity import (
    UnicityParams,
    UnicityReport,
    brute_force_unicity,
    is_unique,
    run_unicity,
    sample_first_n,
)

__version__ = "0.1.0"
