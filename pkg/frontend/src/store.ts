/**
 * Read-only access to label-map store files.
 *
 * Layout (little-endian): magic "RLBL" | u16 version | u8 quant
 * | u8 value mode | u16 H | u16 W | u32 C | u16 k | u64 record count,
 * then a manifest of (u16 id length, UTF-8 id, u64 offset, u64 length),
 * then per-image records: per pixel row-major, k u16 class indices
 * followed by k quantized values.
 */

import * as fs from "node:fs";

export const STORE_MAGIC = "RLBL";
export const SUPPORTED_STORE_VERSION = 1;

export enum QuantFormat {
  F32 = 0,
  F16 = 1,
  F8 = 2,
}

export enum ValueMode {
  RawScores = 0,
  Probabilities = 1,
}

export class FormatError extends Error {}
export class UnknownImageError extends Error {}
export class StoreClosedError extends Error {}

export interface StoreHeader {
  version: number;
  quant: QuantFormat;
  valueMode: ValueMode;
  height: number;
  width: number;
  numClasses: number;
  k: number;
  recordCount: number;
}

export interface SparseRecord {
  /** flat (H*W*k) class indices, row-major pixels */
  indices: Uint16Array;
  /** flat (H*W*k) dequantized values */
  values: Float64Array;
}

const QUANT_BYTES: Record<QuantFormat, number> = {
  [QuantFormat.F32]: 4,
  [QuantFormat.F16]: 2,
  [QuantFormat.F8]: 1,
};

const HEADER_BYTES = 26;

/** IEEE-754 binary16 bit pattern to number. */
export function decodeF16(bits: number): number {
  const sign = bits & 0x8000 ? -1 : 1;
  const exp = (bits >> 10) & 0x1f;
  const mant = bits & 0x3ff;
  if (exp === 0) return sign * mant * 2 ** -24;
  if (exp === 31) return mant ? NaN : sign * Infinity;
  return sign * (1 + mant / 1024) * 2 ** (exp - 15);
}

/** 1-sign/4-exponent/3-mantissa minifloat, bias 7, no infinities, max 448. */
const F8_TABLE: Float64Array = (() => {
  const table = new Float64Array(256);
  for (let code = 0; code < 256; code++) {
    const sign = code & 0x80 ? -1 : 1;
    const exp = (code >> 3) & 0xf;
    const mant = code & 0x7;
    let mag = exp === 0 ? mant * 2 ** -9 : (1 + mant / 8) * 2 ** (exp - 7);
    if ((code & 0x7f) === 0x7f) mag = NaN;
    table[code] = sign * mag;
  }
  return table;
})();

export function decodeF8(code: number): number {
  return F8_TABLE[code & 0xff];
}

function readU64(buf: Buffer, offset: number): number {
  const value = buf.readBigUInt64LE(offset);
  if (value > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FormatError(`u64 field too large at offset ${offset}`);
  }
  return Number(value);
}

interface ManifestEntry {
  offset: number;
  length: number;
}

export class BoundStore {
  private buf: Buffer | null;
  readonly header: StoreHeader;
  readonly imageIds: readonly string[];
  private index: Map<string, ManifestEntry>;

  private constructor(buf: Buffer, label: string) {
    if (buf.length < HEADER_BYTES) throw new FormatError(`${label}: truncated header`);
    if (buf.toString("latin1", 0, 4) !== STORE_MAGIC) {
      throw new FormatError(`${label}: bad magic`);
    }
    const version = buf.readUInt16LE(4);
    if (version !== SUPPORTED_STORE_VERSION) {
      throw new FormatError(
        `${label}: store format version ${version} unsupported (expected ${SUPPORTED_STORE_VERSION})`,
      );
    }
    const quant = buf.readUInt8(6);
    const valueMode = buf.readUInt8(7);
    if (!(quant in QUANT_BYTES)) throw new FormatError(`${label}: unknown quant code ${quant}`);
    if (valueMode !== 0 && valueMode !== 1) {
      throw new FormatError(`${label}: unknown value-mode code ${valueMode}`);
    }
    const height = buf.readUInt16LE(8);
    const width = buf.readUInt16LE(10);
    const numClasses = buf.readUInt32LE(12);
    const k = buf.readUInt16LE(16);
    const recordCount = readU64(buf, 18);
    if (height < 1 || width < 1 || numClasses < 1 || k < 1 || k > numClasses) {
      throw new FormatError(`${label}: inconsistent dimensions`);
    }
    this.header = { version, quant, valueMode, height, width, numClasses, k, recordCount };

    const expected = height * width * k * (2 + QUANT_BYTES[quant as QuantFormat]);
    const index = new Map<string, ManifestEntry>();
    const ids: string[] = [];
    let pos = HEADER_BYTES;
    for (let i = 0; i < recordCount; i++) {
      if (pos + 2 > buf.length) throw new FormatError(`${label}: truncated manifest`);
      const idLen = buf.readUInt16LE(pos);
      pos += 2;
      if (pos + idLen + 16 > buf.length) throw new FormatError(`${label}: truncated manifest`);
      const id = buf.toString("utf8", pos, pos + idLen);
      pos += idLen;
      const offset = readU64(buf, pos);
      const length = readU64(buf, pos + 8);
      pos += 16;
      if (index.has(id)) throw new FormatError(`${label}: duplicate image id ${id}`);
      if (length !== expected || offset < pos || offset + length > buf.length) {
        throw new FormatError(`${label}: record for ${id} out of bounds`);
      }
      index.set(id, { offset, length });
      ids.push(id);
    }
    this.buf = buf;
    this.index = index;
    this.imageIds = ids;
  }

  static open(path: string): BoundStore {
    return new BoundStore(fs.readFileSync(path), path);
  }

  /** Wrap an in-memory copy of a store file (e.g. a SharedArrayBuffer view). */
  static fromBytes(bytes: ArrayBufferLike | Uint8Array, label = "<bytes>"): BoundStore {
    const buf = bytes instanceof Uint8Array
      ? Buffer.from(bytes.buffer, bytes.byteOffset, bytes.byteLength)
      : Buffer.from(bytes);
    return new BoundStore(buf, label);
  }

  get closed(): boolean {
    return this.buf === null;
  }

  close(): void {
    this.buf = null;
  }

  has(imageId: string): boolean {
    return this.index.has(imageId);
  }

  get size(): number {
    return this.imageIds.length;
  }

  getRecord(imageId: string): SparseRecord {
    if (this.buf === null) throw new StoreClosedError("store handle is closed");
    const entry = this.index.get(imageId);
    if (entry === undefined) throw new UnknownImageError(`image id ${imageId} not in store`);
    const { height, width, k, quant } = this.header;
    const pixels = height * width;
    const vb = QUANT_BYTES[quant];
    const stride = k * (2 + vb);
    const indices = new Uint16Array(pixels * k);
    const values = new Float64Array(pixels * k);
    const buf = this.buf;
    for (let p = 0; p < pixels; p++) {
      const base = entry.offset + p * stride;
      for (let t = 0; t < k; t++) {
        indices[p * k + t] = buf.readUInt16LE(base + 2 * t);
        const vpos = base + 2 * k + vb * t;
        values[p * k + t] =
          quant === QuantFormat.F32
            ? buf.readFloatLE(vpos)
            : quant === QuantFormat.F16
              ? decodeF16(buf.readUInt16LE(vpos))
              : decodeF8(buf.readUInt8(vpos));
      }
    }
    return { indices, values };
  }
}

export function open(path: string): BoundStore {
  return BoundStore.open(path);
}
