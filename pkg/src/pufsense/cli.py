"""pufsense command line: authority, sensors, host, server, camera node, tables.

Exit codes: 0 accept/pass, 1 reject/fail, 2 usage or missing state.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
import threading
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bls, certibs, niwi, puf
from .certibs import AttestedReading, Certificate
from .codes import BCH_492_57, CODES
from .fuzzy import dump_helper, paper_sizes
from .groups import PAPER_WIDTHS, ElementWidths
from .harness import (
    CAMERA, KINDS, SENSOR, Registry, RegistryEntry, SensorState, State, StateError,
    check_identity, new_helper_key, signer_for,
)
from .node import boot, camera, footage, motion
from .roles import (
    APPS, MSG_REPORT, MSG_SETUP_BUNDLE, MSG_VERDICT, AppProfile, PsServer, ReportBundle,
    TrustedAuthority, TrustedSensor, Verdict, format_overhead_table, frame_message,
    host_aggregate_and_prove, overhead_report, parse_frame, read_message, report_overhead_bits, symmetric_overhead_bits, ta_setup, write_message,
)

logger = logging.getLogger("pufsense")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

TAMPERS = ("sigma", "cert", "message", "tau", "replay")


class UsageError(Exception):
    pass


class KeyRebuildError(Exception):
    """The PUF readout did not give back the enrolled key."""


def _ok(flag: bool) -> str:
    return "PASS" if flag else "FAIL"


# --- ta ---------------------------------------------------------------------

def cmd_ta_setup(args: argparse.Namespace, state: State) -> int:
    if state.path("registry").exists() and not args.force:
        raise UsageError(f"{state.path('registry')} exists; pass --force to replace it")
    cfg = state.config
    if args.mode:
        cfg.crs_mode = args.mode
    if args.code:
        cfg.code = args.code
    if args.group_widths:
        cfg.group_widths = ElementWidths.parse(args.group_widths)
    cfg.helper_key = new_helper_key(state)
    cfg.validate()
    state.root.mkdir(parents=True, exist_ok=True)
    cfg.save(state.config_path)

    _, master, crs, xk = ta_setup(rng=state.rng("ta-setup"), mode=cfg.crs_mode)
    registry = Registry(master, crs, xk)
    state.save_registry(registry)
    bundle_path = state.path("setup_bundle")
    bundle_path.parent.mkdir(parents=True, exist_ok=True)
    bundle_path.write_bytes(frame_message(MSG_SETUP_BUNDLE, registry.bundle.to_bytes()))
    print(f"setup: {registry.bundle.group.descriptor().decode()}, crs mode {cfg.crs_mode}, code {cfg.code}")
    print(f"registry: {state.path('registry')}")
    print(f"public bundle: {bundle_path}")
    return EXIT_OK


def cmd_ta_enroll(args: argparse.Namespace, state: State) -> int:
    ident = args.id
    identity = check_identity(ident)
    registry = state.load_registry()
    if registry.find(identity) is not None:
        print(f"error: identity {ident!r} already enrolled", file=sys.stderr)
        return EXIT_FAIL
    key = state.config.helper_key_bytes
    code = state.config.code_params
    device_seed = state.device_seed(ident)
    model = state.puf(args.kind, device_seed, ident)
    rng = state.np_rng(f"enroll:{ident}")
    if args.kind == SENSOR:
        ta = TrustedAuthority(registry.master, registry.crs)
        enrollment = ta.enroll_sensor(identity, model, code, rng)
        entry = RegistryEntry(identity, SENSOR, enrollment.pk, enrollment.cert,
                              [dump_helper(enrollment.helper, key).hex()], device_seed)
        registry.append(entry)
        state.save_registry(registry)
        state.save_sensor(SensorState(enrollment, device_seed))
        where = state.sensor_path(ident)
    else:
        if not isinstance(model, puf.RoPufModel):
            raise UsageError("camera nodes need an oscillator PUF profile (camera_profile = ro)")
        store = camera.enroll_camera(registry.master, identity, model, rng, code)
        entry = RegistryEntry(identity, CAMERA, store.cert.pk, store.cert,
                              [dump_helper(store.helper_sk, key).hex(),
                               dump_helper(store.helper_ke, key).hex()], device_seed)
        registry.append(entry)
        state.save_registry(registry)
        node = state.node_dir(ident)
        node.mkdir(parents=True, exist_ok=True)
        store.save(node / "store.json", key)
        (node / "device.json").write_text(json.dumps({"device_seed": device_seed, "power_ups": 0}) + "\n")
        signer = signer_for(state, ident)
        image = boot.build_boot_image(signer, boot.sample_firmware(device_seed),
                                      state.rng(f"boot-image:{ident}"))
        (node / "boot.img").write_bytes(image.to_bytes())
        state.save_rom(ident, signer.rom)
        where = node
    print(f"enrolled {args.kind} {ident} ({len(registry.entries)} in registry); device state in {where}")
    return EXIT_OK


# --- participatory sensing --------------------------------------------------

def _attest(state: State, ident: str, payload: bytes, now: float) -> AttestedReading:
    check_identity(ident)
    if not state.sensor_path(ident).exists():
        raise UsageError(f"sensor {ident!r} is not enrolled")
    s = state.load_sensor(ident)
    model = state.puf(SENSOR, s.device_seed, ident)
    sensor = TrustedSensor(s.enrollment, model, counter=s.counter)
    try:
        sensor.power_up(readout_index=s.power_ups)
    except ValueError as exc:  # includes DecodeError
        raise KeyRebuildError(f"sensor {ident}: {exc}") from None
    reading = sensor.read(payload, now=now)
    s.counter = sensor.counter
    s.power_ups += 1
    state.save_sensor(s)
    return reading


def _tamper_reading(kind: str, reading: AttestedReading, state: State, others: Sequence[AttestedReading]
                    ) -> AttestedReading:
    if kind == "sigma":
        forger = bls.KeyPair.generate(state.rng("forger"))
        sigma = bls.sign(forger.sk, certibs.reading_message(reading.message, reading.tau))
        return replace(reading, sigma=sigma)
    if kind == "cert":
        # a certificate issued to someone else (another sensor, or a rogue authority)
        donor = next((o for o in others if o.identity != reading.identity), None)
        if donor is not None:
            return replace(reading, cert=Certificate(reading.pk, donor.cert.sig))
        rogue = certibs.setup(state.rng("rogue-ta"))
        return replace(reading, cert=certibs.issue_certificate(rogue, reading.identity, reading.pk))
    return reading


def _flip_in_report(data: bytes, report: ReportBundle, field: str) -> bytes:
    """Flip one byte of the first reading's message or freshness stamp."""
    msg, tau = report.readings[0]
    pos = 2 + 4 + (0 if field == "message" else len(msg))
    if field == "message" and not msg:
        raise UsageError("cannot tamper with an empty message")
    out = bytearray(data)
    out[pos] ^= 0x01
    return bytes(out)


def _serve_once(server: PsServer) -> tuple[socket.socket, threading.Thread]:
    """Loopback server that answers exactly one framed report."""
    listener = socket.create_server(("127.0.0.1", 0))

    def run() -> None:
        conn, _ = listener.accept()
        with conn, conn.makefile("rwb") as stream:
            kind, payload = read_message(stream)
            verdict = server.verify(payload) if kind == MSG_REPORT else Verdict(False, "malformed")
            write_message(stream, MSG_VERDICT, verdict.to_bytes())
        listener.close()

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    return listener, thread


def _submit(state: State, args: argparse.Namespace, data: bytes) -> Verdict:
    bundle = state.load_bundle()
    cache = state.load_replay("server_dir")
    server = PsServer(bundle, cache, max_age=state.config.max_age, clock=state.clock)
    if getattr(args, "transport", "file") == "socket":
        listener, thread = _serve_once(server)
        with socket.create_connection(listener.getsockname()) as conn, conn.makefile("rwb") as stream:
            write_message(stream, MSG_REPORT, data)
            kind, payload = read_message(stream)
        thread.join()
        verdict = Verdict.from_bytes(payload) if kind == MSG_VERDICT else Verdict(False, "malformed")
    else:
        verdict = server.verify(data)
    state.save_replay("server_dir", cache)
    log = state.path("server_dir") / "verdicts.log"
    with log.open("a") as fh:
        fh.write(f"{int(state.clock())} {verdict}\n")
    return verdict


def _overhead_lines(q: int, widths: ElementWidths, report: ReportBundle | None = None) -> list[str]:
    paper = report_overhead_bits(q, widths) / 8
    extra = (niwi.actual_counts(q).g1 - niwi.element_counts("asymmetric", q).g1) * widths.g1 / 8
    lines = [f"overhead: {paper:g} bytes (paper count) + {extra:g} bytes c(h_c) at widths {widths}"]
    if report is not None:
        lines.append(f"serialized proof bundle: {len(report.proof_bytes())} bytes (BLS12-381 encoding)")
    return lines


def cmd_report(args: argparse.Namespace, state: State) -> int:
    sensors = [s for s in args.sensors.split(",") if s]
    payload_paths = [p for p in args.payloads.split(",") if p]
    if not sensors or len(sensors) != len(payload_paths):
        raise UsageError("--sensors and --payloads need the same non-zero number of entries")
    payloads = []
    for p in payload_paths:
        try:
            payloads.append(Path(p).read_bytes())
        except OSError as exc:
            raise UsageError(f"cannot read payload {p}: {exc}") from None
    bundle = state.load_bundle()
    now = state.clock()
    readings = [_attest(state, ident, data, now) for ident, data in zip(sensors, payloads)]
    if args.tamper in ("sigma", "cert"):
        readings[0] = _tamper_reading(args.tamper, readings[0], state, readings[1:])
    n = state.next_counter("report")
    rng = state.rng(f"report:{n}")
    try:
        report = host_aggregate_and_prove(readings, bundle.crs, bundle.mpk, rng,
                                          check=args.tamper not in ("sigma", "cert"))
    except ValueError as exc:
        print(f"host refused: {exc}")
        return EXIT_FAIL
    data = report.to_bytes()
    if args.tamper in ("message", "tau"):
        data = _flip_in_report(data, report, args.tamper)
    out = Path(args.out) if args.out else state.path("server_dir") / "inbox" / f"report-{n:05d}.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(frame_message(MSG_REPORT, data))
    print(f"report: Q={report.q}, {len(data)} bytes -> {out}")
    verdict = _submit(state, args, data)
    print(f"verdict: {verdict}")
    if args.tamper == "replay":
        verdict = _submit(state, args, data)
        print(f"verdict (resubmitted): {verdict}")
    for line in _overhead_lines(report.q, state.config.group_widths, report):
        print(line)
    return EXIT_OK if verdict else EXIT_FAIL


def cmd_server_verify(args: argparse.Namespace, state: State) -> int:
    try:
        kind, payload = parse_frame(Path(args.report).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {args.report}: {exc}") from None
    except ValueError:
        kind, payload = -1, b""
    verdict = _submit(state, args, payload) if kind == MSG_REPORT else Verdict(False, "malformed")
    print(f"verdict: {verdict}")
    return EXIT_OK if verdict else EXIT_FAIL


# --- camera node ------------------------------------------------------------

def _boot_node(state: State, ident: str, args: argparse.Namespace) -> tuple[camera.CameraKeys, camera.CameraStore]:
    check_identity(ident)
    node = state.node_dir(ident)
    if not (node / "store.json").exists():
        raise UsageError(f"camera {ident!r} is not enrolled")
    key = state.config.helper_key_bytes
    store = camera.CameraStore.load(node / "store.json", key)
    device = json.loads((node / "device.json").read_text())
    model = state.puf(CAMERA, int(device["device_seed"]), ident)
    image = state.load_boot_image(ident)
    tamper = getattr(args, "tamper_boot", None)
    if tamper:
        image = _tamper_partition(image, tamper)
    n = int(device["power_ups"])
    device["power_ups"] = n + 1
    (node / "device.json").write_text(json.dumps(device) + "\n")
    flip = getattr(args, "flip_rate", None)
    try:
        keys = camera.node_boot(image, state.load_rom(ident), model, store, readout_index=n,
                                flip_rate=flip, rng=state.np_rng(f"readout:{ident}:{n}"))
    except ValueError as exc:  # includes DecodeError
        raise KeyRebuildError(f"camera {ident}: {exc}") from None
    return keys, store


def _tamper_partition(image: boot.BootImage, name: str) -> boot.BootImage:
    parts = list(image.partitions)
    for i, p in enumerate(parts):
        if p.name == name:
            ct = bytearray(p.ciphertext)
            ct[len(ct) // 2] ^= 0x01
            parts[i] = replace(p, ciphertext=bytes(ct))
            return boot.BootImage(tuple(parts))
    raise UsageError(f"no partition named {name!r}")


def cmd_node_key_exchange(args: argparse.Namespace, state: State) -> int:
    keys, store = _boot_node(state, args.id, args)
    record = camera.key_exchange(keys, store)
    path = Path(args.out) if args.out else state.record_path(args.id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(camera.record_to_json(record), indent=2) + "\n")
    print(f"key-exchange record for {args.id} -> {path}")
    return EXIT_OK


def cmd_node_run(args: argparse.Namespace, state: State) -> int:
    if args.synthetic:
        w, h, n = motion.parse_synthetic(args.synthetic)
        frames = motion.synthetic_scene(w, h, n, seed=args.scene_seed)
    else:
        frames = motion.load_frames(args.frames)
    keys, store = _boot_node(state, args.id, args)
    cfg = state.config
    cam = camera.SecureCamera(keys, store, args.footage_len or cfg.footage_len,
                              cfg.area_threshold, cfg.pixel_threshold)
    produced = cam.process(frames)
    store.save(state.node_dir(args.id) / "store.json", cfg.helper_key_bytes)
    server = footage.StorageServer(state.path("storage_dir"))
    for fp in produced:
        path = server.upload(fp)
        print(f"event {fp.event_count}: {fp.n} frames -> {path}")
    if not produced:
        print("no event detected")
    return EXIT_OK


def cmd_caretaker_verify(args: argparse.Namespace, state: State) -> int:
    check_identity(args.id)
    path = Path(args.record) if args.record else state.record_path(args.id)
    try:
        record = camera.record_from_json(json.loads(path.read_text()))
    except FileNotFoundError:
        raise UsageError(f"no key-exchange record at {path}; run 'node key-exchange' first") from None
    try:
        data = Path(args.footage).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {args.footage}: {exc}") from None
    bundle = state.load_bundle()
    cache = state.load_replay("caretaker_dir")
    try:
        frames = footage.caretaker_verify_decrypt(record, bundle.mpk, data, cache)
    except footage.FootageRejected as exc:
        print(f"reject: {exc.reason}")
        return EXIT_FAIL
    finally:
        state.save_replay("caretaker_dir", cache)
    print(f"accept: {len(frames)} frames")
    if args.out:
        paths = motion.save_frames(args.out, frames)
        print(f"frames written to {args.out} ({len(paths)} files)")
    return EXIT_OK


# --- tables -----------------------------------------------------------------

EXPECTED_SIZES = {
    ("bch", 128): (1105, 1108), ("bch", 160): (1381, 1384),
    ("rm_rep", 128): (2048, 2051), ("rm_rep", 160): (2560, 2563),
}

# (name, mean HW, mean HD_intra) targets in percent, tolerances in points
PUF_TARGETS = (("sram8", 63.5, 3.4), ("sram32", None, 7.66), ("ro", 53.95, 3.6))
HW_TOL, INTRA_TOL, INTER_TARGET, INTER_TOL = 2.0, 1.0, 51.1, 3.0


def table_sizes(out: Callable[[str], None] = print) -> bool:
    ok = True
    out(f"{'code':<16} {'key':>4} {'W bits':>7} {'expect':>7} {'gates':>6} {'expect':>7} {'ROs':>5}  check")
    for (name, key_len), (w_exp, g_exp) in EXPECTED_SIZES.items():
        code = CODES[name]
        s = paper_sizes(code, key_len)
        good = s.w_bits == w_exp and s.gates == g_exp
        ok &= good
        out(f"{code.label():<16} {key_len:>4} {s.w_bits:>7} {w_exp:>7} {s.gates:>6} {g_exp:>7} "
            f"{s.num_ros:>5}  {_ok(good)}")
    w = paper_sizes(BCH_492_57, certibs.SK_KEY_BITS).w_bits
    cert_bits = PAPER_WIDTHS.g1 + PAPER_WIDTHS.g2
    out(f"sensor storage: W {w} + cert {cert_bits} = {w + cert_bits} bits "
        f"({-(-(w + cert_bits) // 8)} bytes)")
    return ok


def table_overhead(widths: ElementWidths = PAPER_WIDTHS, apps: Sequence[AppProfile] = APPS,
                   out: Callable[[str], None] = print) -> bool:
    rows = overhead_report(apps, widths)
    out(format_overhead_table(rows))
    ok = True
    if widths == PAPER_WIDTHS and apps == APPS:
        for q, expect in ((1, 400), (2, 520)):
            got = report_overhead_bits(q, widths) / 8
            ok &= got == expect
            out(f"Q={q}: {got:g} bytes, expected {expect}  {_ok(got == expect)}")
    for q in sorted({app.q for app in apps} | {1, 2, 4}):
        sym = niwi.element_counts("symmetric", q, aggregated=False).g
        agg = niwi.element_counts("symmetric", q).g
        good = sym == 30 * q and agg == 6 * q + 12
        ok &= good
        out(f"symmetric Q={q}: {sym} elements without aggregation (30Q), {agg} with (6Q+12), "
            f"{symmetric_overhead_bits(q) // 8} bytes  {_ok(good)}")
    return ok


def table_puf(responses: int = 100, devices: int = 10, out: Callable[[str], None] = print) -> bool:
    ok = True
    out(f"{'profile':<8} {'HW %':>7} {'target':>7} {'HDintra %':>9} {'target':>7} {'max %':>6}  check")
    refs = []
    for name, hw_t, intra_t in PUF_TARGETS:
        model = puf.make_profile(name, seed=0, device_id=f"{name}-0")
        ch = puf.full_challenge(model)
        samples = [model.sample(ch, i) for i in range(responses)]
        stats = puf.characterize(samples[0], samples[1:])
        hw = 100 * float(np.mean([puf.hamming_weight(s) for s in samples]))
        intra = 100 * stats.mean_hd_intra
        good = abs(intra - intra_t) <= INTRA_TOL and (hw_t is None or abs(hw - hw_t) <= HW_TOL)
        ok &= good
        out(f"{name:<8} {hw:>7.2f} {hw_t if hw_t is not None else '-':>7} {intra:>9.2f} {intra_t:>7} "
            f"{100 * stats.max_hd_intra:>6.2f}  {_ok(good)}")
    for d in range(devices):
        model = puf.make_profile("ro", seed=d, device_id=f"ro-{d}")
        refs.append(model.sample(puf.full_challenge(model), 0))
    inter = 100 * puf.hd_inter(refs)
    good = abs(inter - INTER_TARGET) <= INTER_TOL
    ok &= good
    out(f"ro HD_inter over {devices} devices: {inter:.2f}% (target {INTER_TARGET} +- {INTER_TOL})  {_ok(good)}")
    return ok


def cmd_tables(args: argparse.Namespace, state: State | None) -> int:
    if args.which == "sizes":
        ok = table_sizes()
    elif args.which == "overhead":
        widths = ElementWidths.parse(args.group_widths) if args.group_widths else PAPER_WIDTHS
        apps: Sequence[AppProfile] = APPS
        if args.payload:
            sizes = tuple(int(x) for x in args.payload.split(","))
            if args.q is not None and args.q != len(sizes):
                raise UsageError("--q must equal the number of --payload sizes")
            apps = (AppProfile("custom", sizes),)
        elif args.q is not None:
            if args.q < 1:
                raise UsageError("--q must be at least 1")
            apps = (AppProfile("custom", (1024,) * args.q),)
        ok = table_overhead(widths, apps)
    else:
        ok = table_puf(args.responses, args.devices)
    return EXIT_OK if ok else EXIT_FAIL


# --- puf --------------------------------------------------------------------

def cmd_puf_sample(args: argparse.Namespace, state: State | None) -> int:
    model = puf.make_profile(args.profile, args.device_seed, f"{args.profile}-{args.device_seed}")
    ch = puf.full_challenge(model, args.bits)
    text = puf.dump_responses(model.sample(ch, i) for i in range(args.count))
    if args.bits is not None:
        text = "".join(line[: args.bits] + "\n" for line in text.splitlines())
    if args.out:
        Path(args.out).write_text(text)
        print(f"{args.count} responses -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_puf_metrics(args: argparse.Namespace, state: State | None) -> int:
    try:
        samples = puf.read_responses(args.file)
        others = [puf.read_responses(f)[0] for f in args.others]
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    hw = 100 * float(np.mean([puf.hamming_weight(s) for s in samples]))
    print(f"responses: {len(samples)} x {len(samples[0])} bits")
    print(f"HW: {hw:.2f}%")
    if len(samples) > 1:
        mean, mx = puf.hd_intra(samples[0], samples[1:])
        print(f"HD_intra vs first: mean {100 * mean:.2f}%, max {100 * mx:.2f}%")
    if others:
        print(f"HD_inter: {100 * puf.hd_inter([samples[0], *others]):.2f}%")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pufsense", description=__doc__.splitlines()[0])
    p.add_argument("--state", default="pufsense-state", help="state directory (default: %(default)s)")
    p.add_argument("--seed", type=int, help="deterministic randomness (stored in config by 'ta setup')")
    p.add_argument("--now", type=float, help="wall-clock seconds to use instead of the system clock")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ta = sub.add_parser("ta", help="trusted authority").add_subparsers(dest="action", required=True)
    s = ta.add_parser("setup", help="create master keys, CRS and config")
    s.add_argument("--mode", choices=(niwi.HIDING, niwi.BINDING))
    s.add_argument("--code", choices=sorted(CODES))
    s.add_argument("--group-widths", help="bits per G1,G2,GT,Zp element for accounting")
    s.add_argument("--force", action="store_true", help="replace an existing registry")
    s.set_defaults(func=cmd_ta_setup)
    s = ta.add_parser("enroll", help="enroll a sensor or camera")
    s.add_argument("--id", required=True)
    s.add_argument("--kind", choices=KINDS, default=SENSOR)
    s.set_defaults(func=cmd_ta_enroll)

    s = sub.add_parser("report", help="attest, aggregate, prove and submit one report")
    s.add_argument("--sensors", required=True, help="comma-separated sensor ids")
    s.add_argument("--payloads", required=True, help="comma-separated payload files, one per sensor")
    s.add_argument("--tamper", choices=TAMPERS, help="inject one fault to exercise the server")
    s.add_argument("--transport", choices=("file", "socket"), default="file")
    s.add_argument("--out", help="where to write the framed report")
    s.set_defaults(func=cmd_report)

    srv = sub.add_parser("server", help="participatory-sensing server").add_subparsers(dest="action", required=True)
    s = srv.add_parser("verify", help="verify a framed report file")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_server_verify)

    node = sub.add_parser("node", help="secure camera node").add_subparsers(dest="action", required=True)
    s = node.add_parser("key-exchange", help="boot and export pk, cert and k_E to the caretaker")
    s.add_argument("--id", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_node_key_exchange)
    s = node.add_parser("run", help="boot, watch frames and upload protected footage")
    s.add_argument("--id", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", metavar="WxH@N")
    src.add_argument("--frames", metavar="DIR", help="directory of P5 .pgm frames")
    s.add_argument("--scene-seed", type=int, default=0)
    s.add_argument("--footage-len", type=int)
    s.add_argument("--flip-rate", type=float, help="replace the PUF readout by uniform bit flips")
    s.add_argument("--tamper-boot", metavar="PARTITION", help="flip a byte in one boot partition")
    s.set_defaults(func=cmd_node_run)

    care = sub.add_parser("caretaker", help="footage owner").add_subparsers(dest="action", required=True)
    s = care.add_parser("verify", help="verify and decrypt one footage file")
    s.add_argument("--id", required=True)
    s.add_argument("--footage", required=True)
    s.add_argument("--record", help="key-exchange record (default: caretaker store)")
    s.add_argument("--out", help="directory for decrypted .pgm frames")
    s.set_defaults(func=cmd_caretaker_verify)

    s = sub.add_parser("tables", help="reproduce the size, overhead and PUF tables")
    s.add_argument("which", choices=("sizes", "overhead", "puf"))
    s.add_argument("--q", type=int)
    s.add_argument("--payload", help="comma-separated payload sizes in bytes")
    s.add_argument("--group-widths", help="e.g. 160,320,1920,160")
    s.add_argument("--responses", type=int, default=100)
    s.add_argument("--devices", type=int, default=10)
    s.set_defaults(func=cmd_tables, stateless=True)

    pf = sub.add_parser("puf", help="PUF simulators").add_subparsers(dest="action", required=True)
    s = pf.add_parser("sample", help="write simulated responses, one 0/1 line each")
    s.add_argument("--profile", choices=sorted(puf.PROFILES), required=True)
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--device-seed", type=int, default=0)
    s.add_argument("--bits", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_puf_sample, stateless=True)
    s = pf.add_parser("metrics", help="HW and HD statistics of a response file")
    s.add_argument("file")
    s.add_argument("--others", nargs="*", default=[], help="response files of other devices")
    s.set_defaults(func=cmd_puf_metrics, stateless=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        state = None if getattr(args, "stateless", False) else State(args.state, args.seed, args.now)
        return args.func(args, state)
    except boot.BootError as exc:
        print(f"boot refused: {exc}")
        return EXIT_FAIL
    except KeyRebuildError as exc:
        print(f"key reconstruction failed: {exc}")
        return EXIT_FAIL
    except (UsageError, StateError, ValueError) as exc:
        # ValueError covers bad config values and malformed inputs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
