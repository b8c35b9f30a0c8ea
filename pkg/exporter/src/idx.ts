/** IDX file parsing (the classic MNIST distribution format, big-endian).
 *
 * Images: magic 0x00000803, u32 count, u32 rows, u32 cols, then u8 pixels.
 * Labels: magic 0x00000801, u32 count, then u8 labels.
 * Files may be gzip-compressed (.gz); detection is by content.
 */

import * as fs from 'fs'
import * as zlib from 'zlib'

export const IDX_IMAGE_MAGIC = 0x00000803
export const IDX_LABEL_MAGIC = 0x00000801

export interface IdxImages {
  count: number
  rows: number
  cols: number
  pixels: Uint8Array // count * rows * cols
}

function maybeGunzip(buf: Buffer): Buffer {
  if (buf.length >= 2 && buf[0] === 0x1f && buf[1] === 0x8b) {
    return zlib.gunzipSync(buf)
  }
  return buf
}

export function decodeIdxImages(raw: Buffer): IdxImages {
  const buf = maybeGunzip(raw)
  if (buf.length < 16) {
    throw new Error(`truncated IDX image header (${buf.length} bytes)`)
  }
  const magic = buf.readUInt32BE(0)
  if (magic !== IDX_IMAGE_MAGIC) {
    throw new Error(`bad IDX image magic 0x${magic.toString(16)}`)
  }
  const count = buf.readUInt32BE(4)
  const rows = buf.readUInt32BE(8)
  const cols = buf.readUInt32BE(12)
  const expected = 16 + count * rows * cols
  if (buf.length !== expected) {
    throw new Error(`IDX image payload: expected ${expected} bytes, got ${buf.length}`)
  }
  return { count, rows, cols, pixels: new Uint8Array(buf.subarray(16)) }
}

export function decodeIdxLabels(raw: Buffer): Uint8Array {
  const buf = maybeGunzip(raw)
  if (buf.length < 8) {
    throw new Error(`truncated IDX label header (${buf.length} bytes)`)
  }
  const magic = buf.readUInt32BE(0)
  if (magic !== IDX_LABEL_MAGIC) {
    throw new Error(`bad IDX label magic 0x${magic.toString(16)}`)
  }
  const count = buf.readUInt32BE(4)
  if (buf.length !== 8 + count) {
    throw new Error(`IDX label payload: expected ${8 + count} bytes, got ${buf.length}`)
  }
  return new Uint8Array(buf.subarray(8))
}

export function readIdxImages(path: string): IdxImages {
  return decodeIdxImages(fs.readFileSync(path))
}

export function readIdxLabels(path: string): Uint8Array {
  return decodeIdxLabels(fs.readFileSync(path))
}

/** Encoders are used by the tests to craft small fixture files. */
export function encodeIdxImages(images: IdxImages): Buffer {
  const buf = Buffer.alloc(16 + images.pixels.length)
  buf.writeUInt32BE(IDX_IMAGE_MAGIC, 0)
  buf.writeUInt32BE(images.count, 4)
  buf.writeUInt32BE(images.rows, 8)
  buf.writeUInt32BE(images.cols, 12)
  Buffer.from(images.pixels).copy(buf, 16)
  return buf
}

export function encodeIdxLabels(labels: Uint8Array): Buffer {
  const buf = Buffer.alloc(8 + labels.length)
  buf.writeUInt32BE(IDX_LABEL_MAGIC, 0)
  buf.writeUInt32BE(labels.length, 4)
  Buffer.from(labels).copy(buf, 8)
  return buf
}
