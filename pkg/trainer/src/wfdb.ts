/**
 * Minimal WFDB reader: header (.hea), format-212 signal files (.dat),
 * and MIT-format annotation files (.atr).  Covers what the standard
 * arrhythmia recordings use; other signal formats are rejected.
 */

import * as fs from "fs";
import * as path from "path";

export interface SignalSpec {
  fileName: string;
  format: number;
  gain: number;
  baseline: number;
  description: string;
}

export interface WfdbHeader {
  recordName: string;
  signalCount: number;
  samplingFrequency: number;
  sampleCount: number;
  signals: SignalSpec[];
}

export function readHeader(heaPath: string): WfdbHeader {
  const lines = fs
    .readFileSync(heaPath, "utf-8")
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l !== "" && !l.startsWith("#"));
  const head = lines[0].split(/\s+/);
  const recordName = head[0].split("/")[0];
  const signalCount = parseInt(head[1], 10);
  const samplingFrequency = head.length > 2 ? parseFloat(head[2]) : 250;
  const sampleCount = head.length > 3 ? parseInt(head[3], 10) : 0;
  const signals: SignalSpec[] = [];
  for (let i = 0; i < signalCount; i++) {
    const f = lines[1 + i].split(/\s+/);
    // gain field may look like "200", "200(0)", or "200/mV"
    const gainField = f[2] ?? "200";
    const gainMatch = /^([0-9.eE+-]+)(?:\(([-0-9]+)\))?/.exec(gainField);
    signals.push({
      fileName: f[0],
      format: parseInt(f[1], 10),
      gain: gainMatch ? parseFloat(gainMatch[1]) || 200 : 200,
      baseline: gainMatch && gainMatch[2] !== undefined ? parseInt(gainMatch[2], 10) : 0,
      description: f.slice(8).join(" "),
    });
  }
  return { recordName, signalCount, samplingFrequency, sampleCount, signals };
}

/** Decode a format-212 signal file into per-channel digital samples. */
export function readDat212(
  datPath: string,
  signalCount: number,
  sampleCount: number
): Int32Array[] {
  const buf = fs.readFileSync(datPath);
  const total = signalCount * sampleCount;
  const flat = new Int32Array(total);
  let w = 0;
  for (let pos = 0; pos + 2 < buf.length + 1 && w < total; pos += 3) {
    const b0 = buf[pos];
    const b1 = buf[pos + 1];
    const b2 = buf[pos + 2];
    let s0 = ((b1 & 0x0f) << 8) | b0;
    if (s0 > 2047) s0 -= 4096;
    let s1 = ((b1 & 0xf0) << 4) | b2;
    if (s1 > 2047) s1 -= 4096;
    flat[w++] = s0;
    if (w < total) flat[w++] = s1;
  }
  if (w < total) {
    throw new Error(`${datPath}: expected ${total} samples, decoded ${w}`);
  }
  const channels: Int32Array[] = [];
  for (let c = 0; c < signalCount; c++) {
    const ch = new Int32Array(sampleCount);
    for (let i = 0; i < sampleCount; i++) ch[i] = flat[i * signalCount + c];
    channels.push(ch);
  }
  return channels;
}

/** Encode per-channel samples as format 212 (used by tests and fixtures). */
export function writeDat212(channels: Int32Array[], datPath: string): void {
  const signalCount = channels.length;
  const sampleCount = channels[0].length;
  const flat: number[] = [];
  for (let i = 0; i < sampleCount; i++) {
    for (let c = 0; c < signalCount; c++) flat.push(channels[c][i]);
  }
  if (flat.length % 2 === 1) flat.push(0);
  const bytes = Buffer.alloc((flat.length / 2) * 3);
  let pos = 0;
  for (let i = 0; i < flat.length; i += 2) {
    const s0 = flat[i] & 0xfff;
    const s1 = flat[i + 1] & 0xfff;
    bytes[pos++] = s0 & 0xff;
    bytes[pos++] = ((s0 >> 8) & 0x0f) | (((s1 >> 8) & 0x0f) << 4);
    bytes[pos++] = s1 & 0xff;
  }
  fs.writeFileSync(datPath, bytes);
}

// Standard MIT annotation codes -> symbols (the commonly used subset).
const ANNOTATION_SYMBOLS: Record<number, string> = {
  1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A",
  9: "S", 10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|",
  18: "s", 19: "T", 20: "*", 21: "D", 22: '"', 23: "=", 24: "p",
  25: "B", 26: "^", 27: "t", 28: "+", 29: "u", 30: "?", 31: "!",
  32: "[", 33: "]", 34: "e", 35: "n", 36: "@", 37: "x", 38: "f",
  39: "(", 40: ")", 41: "r",
};
const SYMBOL_CODES: Record<string, number> = Object.fromEntries(
  Object.entries(ANNOTATION_SYMBOLS).map(([code, sym]) => [sym, Number(code)])
);

const SKIP = 59;
const NUM = 60;
const SUB = 61;
const CHN = 62;
const AUX = 63;

export interface WfdbAnnotation {
  sampleIndex: number;
  symbol: string;
}

/** Decode a MIT-format annotation file. */
export function readAtr(atrPath: string): WfdbAnnotation[] {
  const buf = fs.readFileSync(atrPath);
  const out: WfdbAnnotation[] = [];
  let time = 0;
  let pos = 0;
  while (pos + 1 < buf.length) {
    const word = buf[pos] | (buf[pos + 1] << 8);
    pos += 2;
    const code = (word >> 10) & 0x3f;
    const delta = word & 0x3ff;
    if (word === 0) break; // end of file marker
    if (code === SKIP) {
      const long =
        (buf[pos] << 16) | (buf[pos + 1] << 24) | buf[pos + 2] | (buf[pos + 3] << 8);
      pos += 4;
      time += long;
      continue;
    }
    if (code === NUM || code === SUB || code === CHN) continue;
    if (code === AUX) {
      pos += delta + (delta % 2); // aux string, padded to even length
      continue;
    }
    time += delta;
    const symbol = ANNOTATION_SYMBOLS[code];
    if (symbol !== undefined) out.push({ sampleIndex: time, symbol });
  }
  return out;
}

/** Encode annotations in MIT format (used by tests and fixtures). */
export function writeAtr(annotations: WfdbAnnotation[], atrPath: string): void {
  const bytes: number[] = [];
  let prev = 0;
  for (const ann of annotations) {
    const code = SYMBOL_CODES[ann.symbol];
    if (code === undefined) throw new Error(`unsupported symbol ${ann.symbol}`);
    let delta = ann.sampleIndex - prev;
    prev = ann.sampleIndex;
    if (delta > 1023) {
      // SKIP word (zero short delta) followed by a 4-byte long interval,
      // stored high 16-bit word first, each word little endian
      const chunk = delta;
      const word = SKIP << 10;
      bytes.push(word & 0xff, (word >> 8) & 0xff);
      bytes.push((chunk >> 16) & 0xff, (chunk >> 24) & 0xff, chunk & 0xff, (chunk >> 8) & 0xff);
      delta = 0;
    }
    const word = (code << 10) | (delta & 0x3ff);
    bytes.push(word & 0xff, (word >> 8) & 0xff);
  }
  bytes.push(0, 0);
  fs.writeFileSync(atrPath, Buffer.from(bytes));
}

export interface WfdbRecord {
  header: WfdbHeader;
  channels: Int32Array[];
  annotations: WfdbAnnotation[];
}

export function readRecord(basePath: string): WfdbRecord {
  const header = readHeader(basePath + ".hea");
  const fmt = header.signals[0]?.format;
  if (header.signals.some((s) => s.format !== 212)) {
    throw new Error(`only format 212 is supported (got ${fmt})`);
  }
  const datPath = path.join(path.dirname(basePath), header.signals[0].fileName);
  const channels = readDat212(datPath, header.signalCount, header.sampleCount);
  const atrPath = basePath + ".atr";
  const annotations = fs.existsSync(atrPath) ? readAtr(atrPath) : [];
  return { header, channels, annotations };
}
