/** EMB1 embedding file format (little-endian).
 *
 * magic "EMB1"; u32 N, d, C; N*d float32 row-major vectors; N int32 labels
 * (-1 = unknown).  This is the interchange format the diffusion engine
 * consumes, so the writer is strict about shapes and label ranges.
 */

import * as fs from 'fs'

export interface EmbeddingSet {
  vectors: Float32Array // n * dim, row-major
  labels: Int32Array
  numClasses: number
  dim: number
}

export const EMB1_MAGIC = 'EMB1'

export function encodeEmb1(set: EmbeddingSet): Buffer {
  const n = set.labels.length
  if (set.vectors.length !== n * set.dim) {
    throw new Error(`vectors length ${set.vectors.length} != n*d = ${n * set.dim}`)
  }
  if (set.numClasses < 2) {
    throw new Error(`numClasses must be >= 2, got ${set.numClasses}`)
  }
  for (let i = 0; i < n; i++) {
    const y = set.labels[i]
    if (y < -1 || y >= set.numClasses) {
      throw new Error(`label ${y} at row ${i} outside [-1, ${set.numClasses})`)
    }
  }
  const header = Buffer.alloc(16)
  header.write(EMB1_MAGIC, 0, 'ascii')
  header.writeUInt32LE(n, 4)
  header.writeUInt32LE(set.dim, 8)
  header.writeUInt32LE(set.numClasses, 12)
  const vectors = Buffer.alloc(n * set.dim * 4)
  for (let i = 0; i < set.vectors.length; i++) {
    vectors.writeFloatLE(set.vectors[i], i * 4)
  }
  const labels = Buffer.alloc(n * 4)
  for (let i = 0; i < n; i++) {
    labels.writeInt32LE(set.labels[i], i * 4)
  }
  return Buffer.concat([header, vectors, labels])
}

export function writeEmb1(set: EmbeddingSet, path: string): void {
  fs.writeFileSync(path, encodeEmb1(set))
}

export function decodeEmb1(buf: Buffer): EmbeddingSet {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== EMB1_MAGIC) {
    throw new Error('bad magic at byte 0')
  }
  if (buf.length < 16) {
    throw new Error(`truncated header at byte ${buf.length}`)
  }
  const n = buf.readUInt32LE(4)
  const dim = buf.readUInt32LE(8)
  const numClasses = buf.readUInt32LE(12)
  const expected = 16 + n * dim * 4 + n * 4
  if (buf.length !== expected) {
    throw new Error(`expected ${expected} bytes, got ${buf.length}`)
  }
  const vectors = new Float32Array(n * dim)
  for (let i = 0; i < vectors.length; i++) {
    vectors[i] = buf.readFloatLE(16 + i * 4)
  }
  const labels = new Int32Array(n)
  const labelOffset = 16 + n * dim * 4
  for (let i = 0; i < n; i++) {
    labels[i] = buf.readInt32LE(labelOffset + i * 4)
  }
  return { vectors, labels, numClasses, dim }
}

export function readEmb1(path: string): EmbeddingSet {
  return decodeEmb1(fs.readFileSync(path))
}
