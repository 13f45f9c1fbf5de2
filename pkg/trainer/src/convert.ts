/**
 * WFDB record -> canonical trace/annotation conversion.
 *
 * The source lead is NOT assumed: `channel` defaults to the first
 * signal but is an explicit, surfaced option (records carry several
 * leads and the choice changes the waveform).
 */

import * as path from "path";

import { mapSymbol } from "./dataset";
import { Annotation, LABEL_SETS, writeAnnotations, writeTrace } from "./traceio";
import { readRecord } from "./wfdb";

export interface ConvertOptions {
  channel: number; // signal index within the record
  labelSet: "NLRAV" | "NSVFQ";
  outDir: string;
}

export interface ConvertResult {
  tracePath: string;
  annotationPath: string;
  sampleCount: number;
  keptBeats: number;
  droppedBeats: number;
}

export function convertRecord(basePath: string, opts: ConvertOptions): ConvertResult {
  const record = readRecord(basePath);
  if (opts.channel < 0 || opts.channel >= record.channels.length) {
    throw new Error(
      `channel ${opts.channel} out of range (record has ${record.channels.length})`
    );
  }
  const classes = LABEL_SETS[opts.labelSet];
  if (!classes) throw new Error(`unknown label set ${opts.labelSet}`);

  const samples = record.channels[opts.channel];
  for (const v of samples) {
    if (Math.abs(v) >= 32768) throw new Error("sample outside 16-bit range");
  }

  const annotations: Annotation[] = [];
  let dropped = 0;
  for (const ann of record.annotations) {
    const label = mapSymbol(ann.symbol, opts.labelSet);
    if (label === null) {
      dropped++;
      continue;
    }
    if (ann.sampleIndex >= samples.length) continue;
    annotations.push({ peakIndex: ann.sampleIndex, label });
  }

  const name = record.header.recordName;
  const tracePath = path.join(opts.outDir, `${name}.trace.csv`);
  const annotationPath = path.join(opts.outDir, `${name}.ann.csv`);
  writeTrace(
    {
      sampleRateHz: record.header.samplingFrequency,
      recordId: name,
      samples,
    },
    tracePath
  );
  writeAnnotations(annotations, annotationPath);
  return {
    tracePath,
    annotationPath,
    sampleCount: samples.length,
    keptBeats: annotations.length,
    droppedBeats: dropped,
  };
}
