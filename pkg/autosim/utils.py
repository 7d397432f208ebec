# Copyright (c) 2023 autosim developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
# implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import hashlib
import json
import math
import zlib
from typing import Any, Iterable, Optional, Tuple

import numpy as np
from semver import VersionInfo

UNKNOWN_VERSION = VersionInfo(0, 0, 0)
TWO_PI = 2.0 * math.pi

Point = Tuple[float, float]


def parse_version(version: str) -> VersionInfo:
    """Parse the version string and return a semver.VersionInfo.

    Checkpoint and personality headers record their format version as a
    string. Older writers recorded MAJOR.MINOR only, so this method will
    attempt to expand those to MAJOR.MINOR.PATCH (keeping any pre-release
    information) before giving up.

    In the event that the string cannot be coerced to be a valid semantic
    versioning form, this method will raise a ValueError indicating that it
    cannot parse the version.

    :param version: the version string to parse
    :type version: str
    :return: the semver.VersionInfo containing the versioning information
    :rtype: VersionInfo
    """
    try:
        return VersionInfo.parse(version)
    except ValueError:
        if version and version[0] == "v":
            return VersionInfo.parse(version[1:])

        if version.count(".") == 1:
            parts = version.split("-", 1)
            new_version = f"{parts[0]}.0"
            if len(parts) > 1:
                new_version = f"{new_version}-{parts[1]}"
            return VersionInfo.parse(new_version)

        raise


def is_compatible_version(found: VersionInfo, supported: VersionInfo) -> bool:
    """Returns True if a file written at `found` can be read by `supported`.

    Readers accept any file with the same major version and a minor version
    no newer than their own.
    """
    return found.major == supported.major and found.minor <= supported.minor


def rng_stream(seed: int, *names: Any) -> np.random.Generator:
    """Derive an independent, reproducible random stream.

    All randomness in a run flows from the explicit seed; each consumer
    (world dynamics, one asset's sensors, the network, exploration noise)
    gets its own stream keyed by name so that adding draws to one consumer
    never shifts another.

    :param seed: the master seed
    :param names: stream keys, e.g. ("sensors", "a1")
    :return: a seeded numpy Generator
    """
    spawn_key = tuple(zlib.crc32(str(name).encode("utf-8")) for name in names)
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key))
    )


def derive_seed(seed: int, *names: Any) -> int:
    """Derive a child integer seed, e.g. one per training episode."""
    return int(rng_stream(seed, "derive", *names).integers(0, 2**63 - 1))


def canonical_json(data: Any) -> str:
    """Serialize data as compact JSON with sorted keys."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def digest(data: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of data."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def wrap_angle(theta: float) -> float:
    """Wrap an angle in radians into [0, 2π)."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod of values just below 0 can round up to exactly 2π
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def angle_diff(target: float, source: float) -> float:
    """Signed shortest rotation from source to target, in (-π, π]."""
    delta = math.fmod(target - source, TWO_PI)
    if delta <= -math.pi:
        delta += TWO_PI
    elif delta > math.pi:
        delta -= TWO_PI
    return delta


def distance(a: Point, b: Point) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def bearing(origin: Point, to: Point) -> float:
    """World-frame bearing from origin to a point, in [0, 2π)."""
    return wrap_angle(math.atan2(to[1] - origin[1], to[0] - origin[0]))


def relative_bearing(origin: Point, heading: float, to: Point) -> float:
    """Bearing of a point relative to a heading, in (-π, π]."""
    return angle_diff(bearing(origin, to), heading)


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    """Shortest distance from point p to the segment a-b."""
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return distance(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / length_sq
    t = min(1.0, max(0.0, t))
    return distance(p, (ax + t * dx, ay + t * dy))


def segment_intersects_circle(a: Point, b: Point, center: Point, radius: float) -> bool:
    """True if the segment a-b passes strictly inside the circle."""
    return point_segment_distance(center, a, b) < radius


def polyline_intersects_circle(points: Iterable[Point], center: Point, radius: float):
    """True if any leg of the polyline passes strictly inside the circle."""
    points = list(points)
    if len(points) == 1:
        return distance(points[0], center) < radius
    return any(
        segment_intersects_circle(a, b, center, radius)
        for a, b in zip(points, points[1:])
    )


def parse_tick_range(text: str) -> Tuple[Optional[int], Optional[int]]:
    """Parse `A..B`, `A..`, `..B` or a single tick `A`, bounds inclusive.

    :raises: ValueError for anything else or a reversed range
    """
    text = text.strip()
    first_text, sep, last_text = text.partition("..")
    if not sep:
        last_text = first_text
    try:
        first = int(first_text) if first_text else None
        last = int(last_text) if last_text else None
    except ValueError:
        raise ValueError(f"tick range {text!r} is not of the form A..B")
    if first is not None and last is not None and last < first:
        raise ValueError(f"tick range {text!r} ends before it starts")
    return first, last
