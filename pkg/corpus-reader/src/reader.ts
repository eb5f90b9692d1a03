import * as fs from "fs";

/**
 * Streaming reader for packed training corpora ("USDM" files).
 *
 * File layout (all integers little-endian):
 *
 *   magic "USDM" | u32 version=1 | u64 layoutHash | u32 capacity | u32 nBins
 *   per bin: u32 nTokens | u32 nDocs | u32 docOffsets[nDocs]
 *            | u32 ids[nTokens] | ceil(nTokens/8) mask bytes (LSB-first)
 *   trailing u64 FNV-1a checksum over all preceding bytes
 *
 * The reader is read-only and holds at most one bin in memory at a time.
 * The checksum is verified on open unless `verifyChecksum: false` is given.
 */

export const CORPUS_MAGIC = Buffer.from("USDM", "ascii");
export const SUPPORTED_VERSION = 1;

const HEADER_SIZE = 24;
const CHECKSUM_SIZE = 8;
const CHECKSUM_CHUNK = 64 * 1024;

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export type CorpusHeader = {
  version: number;
  layoutHash: bigint;
  capacity: number;
  numBins: number;
};

export type CorpusBin = {
  ids: Uint32Array;
  lossMask: boolean[];
  docOffsets: Uint32Array;
};

export class CorpusFormatError extends Error {}
export class CorpusChecksumError extends Error {}

export function fnv1a64(data: Uint8Array, state = FNV_OFFSET): bigint {
  let h = state;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

/** Expand packed LSB-first mask bytes into `count` booleans. */
export function unpackMask(bytes: Uint8Array, count: number): boolean[] {
  const out: boolean[] = new Array(count);
  for (let i = 0; i < count; i++) {
    const byte = bytes[i >> 3];
    if (byte === undefined) {
      throw new CorpusFormatError(`mask truncated: ${count} tokens need ${(count + 7) >> 3} bytes`);
    }
    out[i] = ((byte >> (i & 7)) & 1) === 1;
  }
  return out;
}

export type OpenOptions = {
  /** Verify the trailing checksum before yielding any data (default true). */
  verifyChecksum?: boolean;
};

export class CorpusReader {
  readonly path: string;
  readonly header: CorpusHeader;
  readonly fileSize: number;
  private fd: number;
  private closed = false;

  private constructor(path: string, fd: number, header: CorpusHeader, fileSize: number) {
    this.path = path;
    this.fd = fd;
    this.header = header;
    this.fileSize = fileSize;
  }

  static open(path: string, options: OpenOptions = {}): CorpusReader {
    const fd = fs.openSync(path, "r");
    try {
      const fileSize = fs.fstatSync(fd).size;
      if (fileSize < HEADER_SIZE + CHECKSUM_SIZE) {
        throw new CorpusFormatError(`${path}: too short to be a packed corpus (${fileSize} bytes)`);
      }
      const head = Buffer.alloc(HEADER_SIZE);
      readExact(fd, head, 0);
      if (!head.subarray(0, 4).equals(CORPUS_MAGIC)) {
        throw new CorpusFormatError(
          `${path}: bad magic ${JSON.stringify(head.subarray(0, 4).toString("latin1"))}`,
        );
      }
      const version = head.readUInt32LE(4);
      if (version !== SUPPORTED_VERSION) {
        throw new CorpusFormatError(`${path}: unsupported corpus version ${version}`);
      }
      const header: CorpusHeader = {
        version,
        layoutHash: head.readBigUInt64LE(8),
        capacity: head.readUInt32LE(16),
        numBins: head.readUInt32LE(20),
      };
      if (options.verifyChecksum !== false) {
        verifyChecksum(fd, path, fileSize);
      }
      return new CorpusReader(path, fd, header, fileSize);
    } catch (err) {
      fs.closeSync(fd);
      throw err;
    }
  }

  /** Yield bins in file order, reading one bin at a time. */
  *bins(): Generator<CorpusBin> {
    let offset = HEADER_SIZE;
    const payloadEnd = this.fileSize - CHECKSUM_SIZE;
    for (let i = 0; i < this.header.numBins; i++) {
      const binHead = this.read(offset, 8, payloadEnd, `bin ${i} header`);
      const numTokens = binHead.readUInt32LE(0);
      const numDocs = binHead.readUInt32LE(4);
      offset += 8;

      const docBytes = this.read(offset, 4 * numDocs, payloadEnd, `bin ${i} doc offsets`);
      offset += 4 * numDocs;
      const idBytes = this.read(offset, 4 * numTokens, payloadEnd, `bin ${i} ids`);
      offset += 4 * numTokens;
      const maskLen = Math.ceil(numTokens / 8);
      const maskBytes = this.read(offset, maskLen, payloadEnd, `bin ${i} mask`);
      offset += maskLen;

      yield {
        ids: new Uint32Array(idBytes.buffer, idBytes.byteOffset, numTokens).slice(),
        lossMask: unpackMask(maskBytes, numTokens),
        docOffsets: new Uint32Array(docBytes.buffer, docBytes.byteOffset, numDocs).slice(),
      };
    }
    if (offset !== payloadEnd) {
      throw new CorpusFormatError(
        `${this.path}: ${payloadEnd - offset} unexpected bytes after bin ${this.header.numBins - 1}`,
      );
    }
  }

  close(): void {
    if (!this.closed) {
      fs.closeSync(this.fd);
      this.closed = true;
    }
  }

  private read(offset: number, length: number, payloadEnd: number, what: string): Buffer {
    if (offset + length > payloadEnd) {
      throw new CorpusFormatError(`${this.path}: ${what} extends past the payload`);
    }
    const buf = Buffer.alloc(length);
    readExact(this.fd, buf, offset);
    return buf;
  }
}

function readExact(fd: number, buf: Buffer, position: number): void {
  let done = 0;
  while (done < buf.length) {
    const n = fs.readSync(fd, buf, done, buf.length - done, position + done);
    if (n === 0) {
      throw new CorpusFormatError(`unexpected end of file at byte ${position + done}`);
    }
    done += n;
  }
}

function verifyChecksum(fd: number, path: string, fileSize: number): void {
  const payloadEnd = fileSize - CHECKSUM_SIZE;
  let state = FNV_OFFSET;
  const chunk = Buffer.alloc(CHECKSUM_CHUNK);
  for (let pos = 0; pos < payloadEnd; pos += CHECKSUM_CHUNK) {
    const len = Math.min(CHECKSUM_CHUNK, payloadEnd - pos);
    const view = chunk.subarray(0, len);
    readExact(fd, view, pos);
    state = fnv1a64(view, state);
  }
  const trailer = Buffer.alloc(CHECKSUM_SIZE);
  readExact(fd, trailer, payloadEnd);
  const stored = trailer.readBigUInt64LE(0);
  if (stored !== state) {
    throw new CorpusChecksumError(
      `${path}: checksum mismatch (stored ${stored.toString(16)}, computed ${state.toString(16)})`,
    );
  }
}
