"""Local content-addressed object store simulating a small cluster.

Access nodes and storage nodes are in-process roles.  Writes are routed
round-robin over access-node contexts, named under the store's scheme and
copied onto ``replica_factor`` distinct storage nodes.  Every read
re-hashes the replica it serves; :meth:`Store.scrub` re-hashes all of them
and rewrites damaged copies from a healthy one.

On-disk layout (see docs/format.md for the byte-level record format)::

    root/store.json                  layout parameters and scheme
    root/nodes.json                  access-node counters and generator positions
    root/manifest.log                append-only object records
    root/sn-NN/XY/<address text>     one replica; XY = first two address characters
"""

from __future__ import annotations

import enum
import fcntl
import json
import logging
import os
import struct
import threading
import time
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from castore import naming
from castore import probability as prob
from castore.errors import (
    ContentTooLarge,
    IntegrityError,
    ObjectNotFound,
    ReplicaWriteError,
    SchemeMismatch,
)
from castore.naming import AccessNodeContext, ContentAddress, NamingScheme
from castore.prng import Prbg

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CONFIG_FILE = "store.json"
NODES_FILE = "nodes.json"
MANIFEST_FILE = "manifest.log"
TMP_SUFFIX = ".tmp"

RECORD_OBJECT = 1
_SCHEME_BY_ID = {s.scheme_id: s for s in NamingScheme}


class ObjectKind(enum.Enum):
    BLOB = "blob"
    CLIP = "clip"


_KIND_CODES = {ObjectKind.BLOB: 0, ObjectKind.CLIP: 1}
_KIND_BY_CODE = {v: k for k, v in _KIND_CODES.items()}


@dataclass
class ScrubState:
    last_verified: float | None = None
    status: str = "unverified"


@dataclass
class StoredObject:
    ca: ContentAddress
    kind: ObjectKind
    size: int
    replica_paths: list[str]
    scrub_state: ScrubState = field(default_factory=ScrubState)


@dataclass
class ClusterConfig:
    root: Path | str
    scheme: NamingScheme | None = None
    access_node_count: int = 4
    storage_node_count: int = 3
    replica_factor: int = 2
    test_seed: bytes | None = None
    frozen_clock: int | None = None
    native_digests: bool = True
    durable: bool = True

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        if isinstance(self.test_seed, str):
            self.test_seed = self.test_seed.encode()
        if not 1 <= self.access_node_count <= 64:
            raise ValueError(f"access_node_count must be in 1..64, got {self.access_node_count}")
        if self.replica_factor < 2:
            raise ValueError(f"replica_factor must be >= 2, got {self.replica_factor}")
        if self.replica_factor > self.storage_node_count:
            raise ValueError(
                f"replica_factor {self.replica_factor} exceeds storage_node_count {self.storage_node_count}"
            )


@dataclass
class ScrubReport:
    # Counts replica images, so a clean pass reports objects * replica_factor.
    objects_checked: int = 0
    corruptions_detected: list[tuple[ContentAddress, int]] = field(default_factory=list)
    repairs_made: int = 0
    unrecoverable: list[ContentAddress] = field(default_factory=list)
    io_errors: list[tuple[ContentAddress, int, str]] = field(default_factory=list)


@dataclass
class ReplicaStatus:
    index: int
    path: str
    healthy: bool
    reason: str = ""


@dataclass
class StoreStats:
    scheme: NamingScheme
    objects: int
    bytes: int
    by_kind: dict[str, int]
    by_scheme: dict[str, int]
    collision_probability: prob.Probability | None


def collision_probability_for(scheme: NamingScheme, count: int) -> prob.Probability | None:
    """Birthday bound for ``count`` live addresses; None for GM, which has no count-only form."""
    if scheme is NamingScheme.GM:
        return None
    if count < 2:
        return prob.Probability.zero()
    if scheme is NamingScheme.M:
        return prob.m_collision(count)
    if scheme is NamingScheme.MPP:
        return prob.mpp_collision(count)
    return None


# ---------------------------------------------------------------------------
# manifest records
# ---------------------------------------------------------------------------


def encode_record(obj: StoredObject) -> bytes:
    payload = struct.pack(
        ">BBBQ",
        RECORD_OBJECT,
        obj.ca.scheme.scheme_id,
        _KIND_CODES[obj.kind],
        obj.size,
    )
    payload += obj.ca.to_bytes()
    payload += struct.pack(">B", len(obj.replica_paths))
    for path in obj.replica_paths:
        raw = path.encode("utf-8")
        payload += struct.pack(">H", len(raw)) + raw
    return struct.pack(">I", len(payload)) + payload + struct.pack(">I", zlib.crc32(payload))


def decode_record(payload: bytes) -> StoredObject:
    rtype, scheme_id, kind_code, size = struct.unpack_from(">BBBQ", payload, 0)
    if rtype != RECORD_OBJECT:
        raise ValueError(f"unknown record type {rtype}")
    scheme = _SCHEME_BY_ID[scheme_id]
    off = 11
    nbytes = scheme.width // 8
    ca = ContentAddress.from_bytes(scheme, payload[off:off + nbytes])
    off += nbytes
    (count,) = struct.unpack_from(">B", payload, off)
    off += 1
    paths = []
    for _ in range(count):
        (plen,) = struct.unpack_from(">H", payload, off)
        off += 2
        paths.append(payload[off:off + plen].decode("utf-8"))
        off += plen
    if off != len(payload):
        raise ValueError("trailing bytes in manifest record")
    return StoredObject(ca=ca, kind=_KIND_BY_CODE[kind_code], size=size, replica_paths=paths)


def read_manifest(data: bytes) -> tuple[list[StoredObject], int, bool]:
    """Parse records from ``data``.

    Returns ``(records, good_length, clean)``.  Parsing stops at the first
    short or checksum-failing record; ``clean`` is False when that record
    is followed by further bytes, i.e. the damage is not just a torn tail.
    """
    records = []
    off = 0
    while off < len(data):
        if off + 4 > len(data):
            return records, off, True
        (plen,) = struct.unpack_from(">I", data, off)
        end = off + 4 + plen + 4
        if end > len(data):
            return records, off, True
        payload = data[off + 4:off + 4 + plen]
        (crc,) = struct.unpack_from(">I", data, off + 4 + plen)
        try:
            if zlib.crc32(payload) != crc:
                raise ValueError("checksum mismatch")
            records.append(decode_record(payload))
        except (ValueError, KeyError, struct.error, UnicodeDecodeError):
            return records, off, end >= len(data)
        off = end
    return records, off, True


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------


class Store:
    """Open (or create) the store rooted at ``config.root``.

    An existing store keeps its persisted scheme and layout; passing a
    different ``config.scheme`` raises :class:`SchemeMismatch`.
    """

    def __init__(self, config: ClusterConfig) -> None:
        self.root = Path(config.root)
        self._native = config.native_digests
        self._durable = config.durable
        self._test_seed = config.test_seed
        self._frozen_clock = config.frozen_clock
        self._closed = False

        self._index: dict[ContentAddress, StoredObject] = {}
        self._flagged: set[tuple[ContentAddress, int]] = set()
        self._manifest_lock = threading.Lock()
        self._route_lock = threading.Lock()
        self._locks_lock = threading.Lock()
        self._object_locks: dict[ContentAddress, threading.Lock] = {}

        self.config = self._load_or_init_config(config)
        self.scheme: NamingScheme = self.config.scheme
        self._contexts = self._make_contexts()
        self._next_node = 0
        self._replay_manifest()

    # -- lifecycle ---------------------------------------------------------

    def _load_or_init_config(self, config: ClusterConfig) -> ClusterConfig:
        path = self.root / CONFIG_FILE
        if path.exists():
            saved = json.loads(path.read_text())
            scheme = NamingScheme(saved["scheme"])
            if config.scheme is not None and config.scheme is not scheme:
                raise SchemeMismatch(
                    f"store at {self.root} uses scheme {scheme.value}, not {config.scheme.value}"
                )
            return ClusterConfig(
                root=self.root,
                scheme=scheme,
                access_node_count=saved["access_node_count"],
                storage_node_count=saved["storage_node_count"],
                replica_factor=saved["replica_factor"],
                test_seed=config.test_seed,
                frozen_clock=config.frozen_clock,
                native_digests=config.native_digests,
                durable=config.durable,
            )
        if config.scheme is None:
            config.scheme = NamingScheme.M
        self.root.mkdir(parents=True, exist_ok=True)
        for i in range(config.storage_node_count):
            (self.root / self._node_dir(i)).mkdir(exist_ok=True)
        self._atomic_write(
            path,
            json.dumps(
                {
                    "format": FORMAT_VERSION,
                    "scheme": config.scheme.value,
                    "access_node_count": config.access_node_count,
                    "storage_node_count": config.storage_node_count,
                    "replica_factor": config.replica_factor,
                },
                indent=2,
            ).encode(),
        )
        (self.root / MANIFEST_FILE).touch()
        return config

    def _make_contexts(self) -> list[AccessNodeContext]:
        saved = {}
        nodes_path = self.root / NODES_FILE
        if nodes_path.exists():
            saved = {int(k): v for k, v in json.loads(nodes_path.read_text()).items()}
        clock = (lambda: self._frozen_clock) if self._frozen_clock is not None else None
        contexts = []
        for i in range(self.config.access_node_count):
            state = saved.get(i, {})
            if self._test_seed is not None:
                seed = self._test_seed + b"/access-node/" + i.to_bytes(2, "big")
                gen = Prbg.resume(seed, state.get("prng_position", 0))
            else:
                gen = Prbg.from_entropy()
            contexts.append(AccessNodeContext(i, prng=gen, clock=clock, counter=state.get("counter")))
        return contexts

    def _save_contexts(self) -> None:
        state = {
            str(ctx.node_id): {"counter": ctx.counter, "prng_position": ctx.prng.position}
            for ctx in self._contexts
        }
        self._atomic_write(self.root / NODES_FILE, json.dumps(state, indent=2).encode())

    def close(self) -> None:
        if self._closed:
            return
        if self.scheme is NamingScheme.GM:
            self._save_contexts()
        self._closed = True

    def __enter__(self) -> Store:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- manifest ----------------------------------------------------------

    @property
    def _manifest_path(self) -> Path:
        return self.root / MANIFEST_FILE

    def _replay_manifest(self) -> None:
        data = self._manifest_path.read_bytes()
        records, good, clean = read_manifest(data)
        if not clean:
            log.warning("manifest damaged before its tail; rebuilding from replica scan")
            self.rebuild_manifest(records)
            return
        if good < len(data):
            log.warning("discarding %d bytes of torn manifest tail", len(data) - good)
            with open(self._manifest_path, "r+b") as fh:
                fh.truncate(good)
        for obj in records:
            self._index[obj.ca] = obj
        self._sweep_orphans()

    def _append_record(self, obj: StoredObject) -> None:
        record = encode_record(obj)
        with self._manifest_lock, open(self._manifest_path, "ab") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(record)
                fh.flush()
                if self._durable:
                    os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _replica_files(self) -> Iterator[Path]:
        for node_dir in sorted(self.root.glob("sn-*")):
            for sub in sorted(p for p in node_dir.iterdir() if p.is_dir()):
                yield from sorted(p for p in sub.iterdir() if p.is_file())

    def _sweep_orphans(self) -> None:
        # Replicas without a manifest record belong to writes that never completed.
        referenced = {p for obj in self._index.values() for p in obj.replica_paths}
        for path in self._replica_files():
            rel = path.relative_to(self.root).as_posix()
            if rel not in referenced:
                log.info("removing unreferenced replica %s", rel)
                path.unlink()

    def rebuild_manifest(self, known: list[StoredObject] | None = None) -> int:
        """Recreate the manifest by scanning replica files.

        Replicas whose content no longer matches their file name are left
        in the record so scrub can report or repair them.  Kinds come from
        ``known`` records when available, else default to blob.  Returns the
        number of objects recovered.
        """
        kinds = {obj.ca: obj.kind for obj in known or ()}
        found: dict[ContentAddress, list[str]] = {}
        sizes: dict[ContentAddress, int] = {}
        for path in self._replica_files():
            if path.name.endswith(TMP_SUFFIX):
                path.unlink()
                continue
            try:
                ca = ContentAddress.parse(path.name, self.scheme)
            except ValueError:
                log.warning("ignoring stray file %s", path)
                continue
            rel = path.relative_to(self.root).as_posix()
            found.setdefault(ca, []).append(rel)
            content = path.read_bytes()
            if naming.content_matches(ca, content, native=self._native):
                sizes[ca] = len(content)
            else:
                sizes.setdefault(ca, len(content))
        objects = [
            StoredObject(ca=ca, kind=kinds.get(ca, ObjectKind.BLOB), size=sizes[ca], replica_paths=paths)
            for ca, paths in found.items()
        ]
        tmp = self._manifest_path.with_name(MANIFEST_FILE + TMP_SUFFIX)
        tmp.write_bytes(b"".join(encode_record(obj) for obj in objects))
        os.replace(tmp, self._manifest_path)
        self._index = {obj.ca: obj for obj in objects}
        return len(objects)

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def _node_dir(i: int) -> str:
        return f"sn-{i:02d}"

    def _replica_relpath(self, ca: ContentAddress, node: int) -> str:
        text = ca.text
        return f"{self._node_dir(node)}/{text[:2]}/{text}"

    def _placement(self, ca: ContentAddress) -> list[int]:
        n = self.config.storage_node_count
        start = ca.value % n
        return [(start + i) % n for i in range(self.config.replica_factor)]

    def _atomic_write(self, path: Path, data: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + TMP_SUFFIX)
        with open(tmp, "wb") as fh:
            fh.write(data)
            if self._durable:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _object_lock(self, ca: ContentAddress) -> threading.Lock:
        with self._locks_lock:
            lock = self._object_locks.get(ca)
            if lock is None:
                lock = self._object_locks[ca] = threading.Lock()
            return lock

    def _route(self) -> AccessNodeContext:
        with self._route_lock:
            ctx = self._contexts[self._next_node]
            self._next_node = (self._next_node + 1) % len(self._contexts)
            return ctx

    def _check_open(self) -> None:
        if self._closed:
            raise ValueError("store is closed")

    def _get(self, ca: ContentAddress) -> StoredObject:
        try:
            return self._index[ca]
        except KeyError:
            raise ObjectNotFound(f"no object with address {ca}") from None

    # -- public API --------------------------------------------------------

    @property
    def contexts(self) -> list[AccessNodeContext]:
        return list(self._contexts)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, ca: ContentAddress) -> bool:
        return ca in self._index

    def objects(self) -> list[StoredObject]:
        return list(self._index.values())

    def get_object(self, ca: ContentAddress) -> StoredObject:
        return self._get(ca)

    @property
    def flagged(self) -> set[tuple[ContentAddress, int]]:
        """Replicas a read found damaged and that await repair by scrub."""
        return set(self._flagged)

    def write(self, content: bytes, kind: ObjectKind | str = ObjectKind.BLOB) -> ContentAddress:
        """Store ``content`` and return its address.

        Under M and M++ content that is already stored is not written again.
        Under GM every write produces a new object.
        """
        self._check_open()
        kind = ObjectKind(kind)
        content = bytes(content)
        if len(content) > naming.MAX_CONTENT_BYTES:
            raise ContentTooLarge(f"content is {len(content)} bytes; limit is {naming.MAX_CONTENT_BYTES}")
        if self.scheme is NamingScheme.M:
            ca = naming.compute_m(content, native=self._native)
        elif self.scheme is NamingScheme.MPP:
            ca = naming.compute_mpp(content, native=self._native)
        else:
            ca, _ = naming.compute_gm(content, self._route(), native=self._native)

        with self._object_lock(ca):
            if ca in self._index:
                if self.scheme is NamingScheme.GM:
                    raise IntegrityError(f"GM address {ca} generated twice")
                return ca
            paths = [self._replica_relpath(ca, node) for node in self._placement(ca)]
            written: list[Path] = []
            for rel in paths:
                target = self.root / rel
                try:
                    self._atomic_write(target, content)
                except OSError as exc:
                    for done in written:
                        done.unlink(missing_ok=True)
                    raise ReplicaWriteError(ca, rel.split("/")[0], exc) from exc
                written.append(target)
            obj = StoredObject(ca=ca, kind=kind, size=len(content), replica_paths=paths)
            self._append_record(obj)
            self._index[ca] = obj
        return ca

    def read(self, ca: ContentAddress) -> bytes:
        """Return verified content, falling back across replicas.

        Damaged replicas are flagged for repair; if none verifies an
        :class:`IntegrityError` names the address.
        """
        self._check_open()
        obj = self._get(ca)
        for i, rel in enumerate(obj.replica_paths):
            try:
                content = (self.root / rel).read_bytes()
            except OSError as exc:
                log.warning("replica %d of %s unreadable: %s", i, ca, exc)
                self._flagged.add((ca, i))
                continue
            if naming.content_matches(ca, content, native=self._native):
                return content
            log.warning("replica %d of %s failed verification", i, ca)
            self._flagged.add((ca, i))
        raise IntegrityError(f"all {len(obj.replica_paths)} replicas of {ca} fail verification")

    def verify(self, ca: ContentAddress) -> list[ReplicaStatus]:
        obj = self._get(ca)
        out = []
        for i, rel in enumerate(obj.replica_paths):
            try:
                content = (self.root / rel).read_bytes()
            except OSError as exc:
                out.append(ReplicaStatus(i, rel, False, f"unreadable: {exc.strerror or exc}"))
                continue
            if naming.content_matches(ca, content, native=self._native):
                out.append(ReplicaStatus(i, rel, True))
            else:
                out.append(ReplicaStatus(i, rel, False, "content does not match address"))
        return out

    def scrub(self) -> ScrubReport:
        """Re-hash every replica of every object and repair damaged ones."""
        self._check_open()
        report = ScrubReport()
        for obj in self.objects():
            with self._object_lock(obj.ca):
                self._scrub_object(obj, report)
        return report

    def _scrub_object(self, obj: StoredObject, report: ScrubReport) -> None:
        good: bytes | None = None
        bad: list[int] = []
        for i, rel in enumerate(obj.replica_paths):
            report.objects_checked += 1
            try:
                content = (self.root / rel).read_bytes()
            except OSError as exc:
                report.io_errors.append((obj.ca, i, str(exc)))
                report.corruptions_detected.append((obj.ca, i))
                bad.append(i)
                continue
            if naming.content_matches(obj.ca, content, native=self._native):
                if good is None:
                    good = content
            else:
                report.corruptions_detected.append((obj.ca, i))
                bad.append(i)

        if bad and good is None:
            report.unrecoverable.append(obj.ca)
            obj.scrub_state = ScrubState(time.time(), "unrecoverable")
            return
        for i in bad:
            try:
                self._atomic_write(self.root / obj.replica_paths[i], good)
            except OSError as exc:
                report.io_errors.append((obj.ca, i, f"repair failed: {exc}"))
                continue
            report.repairs_made += 1
            self._flagged.discard((obj.ca, i))
        obj.scrub_state = ScrubState(time.time(), "repaired" if bad else "ok")

    def corrupt(self, ca: ContentAddress, replica_index: int, byte_offset: int, xor_mask: int) -> None:
        """Flip bits of one on-disk replica; the manifest is untouched."""
        obj = self._get(ca)
        if not 0 <= replica_index < len(obj.replica_paths):
            raise IndexError(f"replica index {replica_index} out of range for {ca}")
        if not 0 <= xor_mask <= 0xFF:
            raise ValueError(f"xor_mask must be a byte value, got {xor_mask}")
        path = self.root / obj.replica_paths[replica_index]
        with open(path, "r+b") as fh:
            fh.seek(0, os.SEEK_END)
            size = fh.tell()
            if not 0 <= byte_offset < size:
                raise IndexError(f"byte offset {byte_offset} outside replica of {size} bytes")
            fh.seek(byte_offset)
            (byte,) = fh.read(1)
            fh.seek(byte_offset)
            fh.write(bytes([byte ^ xor_mask]))

    def stats(self) -> StoreStats:
        objs = self.objects()
        kinds = Counter(obj.kind.value for obj in objs)
        return StoreStats(
            scheme=self.scheme,
            objects=len(objs),
            bytes=sum(obj.size for obj in objs),
            by_kind={k.value: kinds.get(k.value, 0) for k in ObjectKind},
            by_scheme={s.value: sum(1 for o in objs if o.ca.scheme is s) for s in NamingScheme},
            collision_probability=collision_probability_for(self.scheme, len(objs)),
        )


def open_store(root, **kwargs) -> Store:
    return Store(ClusterConfig(root=root, **kwargs))
