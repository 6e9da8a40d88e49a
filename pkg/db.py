"""MongoDB mirror of run manifests and result rows.

When MONGODB_URI is not set this module is not used; CSV files and their JSON
manifests remain the primary outputs either way.
"""

from __future__ import annotations

import logging
import os
from datetime import datetime, timezone

from pymongo import ASCENDING, MongoClient
from pymongo.collection import Collection
from pymongo.database import Database

log = logging.getLogger("anyon_reduction.db")

DB_NAME = "anyon_reduction"

_client: MongoClient | None = None
_db: Database | None = None


def enabled() -> bool:
    return bool(os.environ.get("MONGODB_URI"))


def get_client() -> MongoClient:
    """Return a singleton MongoClient, creating it on first call."""
    global _client
    if _client is None:
        uri = os.environ.get("MONGODB_URI", "")
        if not uri:
            raise RuntimeError("MONGODB_URI environment variable is not set")
        _client = MongoClient(uri)
    return _client


def get_db() -> Database:
    global _db
    if _db is None:
        _db = get_client()[DB_NAME]
    return _db


def close():
    """Close the MongoDB connection."""
    global _client, _db
    if _client is not None:
        _client.close()
        _client = None
        _db = None


def ensure_indexes():
    db = get_db()
    db.runs.create_index("run_id", unique=True)
    db.runs.create_index([("verb", ASCENDING), ("created_at", ASCENDING)])
    db.rows.create_index([("run_id", ASCENDING), ("verb", ASCENDING)])


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def _runs_col() -> Collection:
    return get_db().runs


def save_manifest(manifest: dict) -> None:
    """Upsert a run manifest keyed by its run_id.

    checksums is keyed by file name; names contain dots, so it is stored as a
    list of {file, sha256} documents.
    """
    doc = {**manifest, "stored_at": datetime.now(timezone.utc)}
    if "checksums" in doc:
        doc["checksums"] = [{"file": name, "sha256": digest}
                            for name, digest in sorted(manifest["checksums"].items())]
    _runs_col().update_one({"run_id": manifest["run_id"]}, {"$set": doc}, upsert=True)


def get_manifest(run_id: str) -> dict | None:
    doc = _runs_col().find_one({"run_id": run_id})
    if doc:
        doc.pop("_id", None)
        doc.pop("stored_at", None)
        if "checksums" in doc:
            doc["checksums"] = {c["file"]: c["sha256"] for c in doc["checksums"]}
    return doc


# ---------------------------------------------------------------------------
# rows
# ---------------------------------------------------------------------------

def _rows_col() -> Collection:
    return get_db().rows


def save_rows(run_id: str, verb: str, rows: list[dict]) -> int:
    """Replace the stored rows of a run; row order is kept in a seq field."""
    col = _rows_col()
    col.delete_many({"run_id": run_id})
    if not rows:
        return 0
    docs = [{**row, "run_id": run_id, "verb": verb, "seq": i} for i, row in enumerate(rows)]
    col.insert_many(docs)
    return len(docs)
