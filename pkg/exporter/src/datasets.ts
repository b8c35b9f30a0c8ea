/** Dataset sources for the exporter.
 *
 * "mnist" reads the classic IDX files from a local directory (the sandbox
 * has no network access, so there is no downloader -- point --data-dir at an
 * existing copy).  "synthetic-digits" procedurally generates a deterministic
 * 10-class 28x28 stand-in with the same shape so the full pipeline runs
 * offline.
 */

import * as fs from 'fs'
import * as path from 'path'

import { readIdxImages, readIdxLabels } from './idx'
import { Rng } from './rng'

export interface RawDataset {
  /** n * dim, values normalized to [0, 1] */
  images: Float32Array
  labels: Uint8Array
  dim: number
  numClasses: number
}

export class DatasetUnavailableError extends Error {}

const MNIST_FILES = {
  train: ['train-images-idx3-ubyte', 'train-labels-idx1-ubyte'],
  test: ['t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'],
}

function findFile(dir: string, base: string): string {
  for (const name of [base, `${base}.gz`]) {
    const candidate = path.join(dir, name)
    if (fs.existsSync(candidate)) return candidate
  }
  throw new DatasetUnavailableError(
    `cannot fetch mnist: ${base}[.gz] not found under ${dir}`
  )
}

export function loadMnist(dataDir: string, split: 'train' | 'test'): RawDataset {
  const [imagesBase, labelsBase] = MNIST_FILES[split]
  const images = readIdxImages(findFile(dataDir, imagesBase))
  const labels = readIdxLabels(findFile(dataDir, labelsBase))
  if (labels.length !== images.count) {
    throw new Error(`mnist ${split}: ${images.count} images but ${labels.length} labels`)
  }
  const dim = images.rows * images.cols
  const floats = new Float32Array(images.pixels.length)
  for (let i = 0; i < images.pixels.length; i++) {
    floats[i] = images.pixels[i] / 255
  }
  return { images: floats, labels, dim, numClasses: 10 }
}

const SIDE = 28
const SYNTH_DIM = SIDE * SIDE

/** One 28x28 digit-like image: a class-specific pair of bright bands plus
 * noise and a small random shift.  Classes are distinct but not trivially
 * separable once noise is in. */
function synthImage(cls: number, rng: Rng, out: Float32Array, offset: number): void {
  const rowBand = cls % 5
  const colBand = Math.floor(cls / 5)
  const dr = rng.int(5) - 2
  const dc = rng.int(5) - 2
  for (let r = 0; r < SIDE; r++) {
    for (let c = 0; c < SIDE; c++) {
      let v = 0.1
      const rb = Math.floor((r + dr + SIDE) % SIDE / (SIDE / 5))
      const cb = Math.floor((c + dc + SIDE) % SIDE / (SIDE / 2))
      if (rb === rowBand) v += 0.5
      if (cb === colBand) v += 0.3
      v += 0.08 * rng.normal()
      out[offset + r * SIDE + c] = Math.min(1, Math.max(0, v))
    }
  }
}

export function generateSyntheticDigits(n: number, seed: number, balanced: boolean): RawDataset {
  const rng = new Rng(seed)
  const images = new Float32Array(n * SYNTH_DIM)
  const labels = new Uint8Array(n)
  for (let i = 0; i < n; i++) {
    labels[i] = balanced ? i % 10 : rng.int(10)
  }
  // shuffle so class order carries no information
  for (let i = n - 1; i > 0; i--) {
    const j = rng.int(i + 1)
    const tmp = labels[i]
    labels[i] = labels[j]
    labels[j] = tmp
  }
  for (let i = 0; i < n; i++) {
    synthImage(labels[i], rng, images, i * SYNTH_DIM)
  }
  return { images, labels, dim: SYNTH_DIM, numClasses: 10 }
}

/** Indices of a size-n subset, balanced within +-1 per class when asked. */
export function selectSubset(labels: Uint8Array, numClasses: number, n: number,
                             balanced: boolean, rng: Rng): number[] {
  if (n > labels.length) {
    throw new Error(`subset size ${n} exceeds dataset size ${labels.length}`)
  }
  if (!balanced) {
    return rng.sampleWithoutReplacement(labels.length, n)
  }
  const byClass: number[][] = Array.from({ length: numClasses }, () => [])
  for (let i = 0; i < labels.length; i++) {
    byClass[labels[i]].push(i)
  }
  const base = Math.floor(n / numClasses)
  const remainder = n - base * numClasses
  const chosen: number[] = []
  for (let c = 0; c < numClasses; c++) {
    const want = base + (c < remainder ? 1 : 0)
    const pool = byClass[c]
    if (pool.length < want) {
      throw new Error(`class ${c} has ${pool.length} points, need ${want} for a balanced subset`)
    }
    for (const k of rng.sampleWithoutReplacement(pool.length, want)) {
      chosen.push(pool[k])
    }
  }
  return chosen
}

export interface DatasetSpec {
  name: 'mnist' | 'synthetic-digits'
  split: 'train' | 'test'
  n: number
  balanced: boolean
  seed: number
  dataDir?: string
}

/** Subset of a dataset source as (images, labels) ready for the model. */
export function loadSubset(spec: DatasetSpec): RawDataset {
  const seed = spec.seed * 2 + (spec.split === 'test' ? 1 : 0)
  if (spec.name === 'synthetic-digits') {
    return generateSyntheticDigits(spec.n, seed, spec.balanced)
  }
  if (spec.name === 'mnist') {
    if (!spec.dataDir) {
      throw new DatasetUnavailableError(
        'cannot fetch mnist: no --data-dir given and this build has no downloader'
      )
    }
    const full = loadMnist(spec.dataDir, spec.split)
    const rng = new Rng(seed)
    const idx = selectSubset(full.labels, full.numClasses, spec.n, spec.balanced, rng)
    const images = new Float32Array(idx.length * full.dim)
    const labels = new Uint8Array(idx.length)
    idx.forEach((src, dst) => {
      images.set(full.images.subarray(src * full.dim, (src + 1) * full.dim), dst * full.dim)
      labels[dst] = full.labels[src]
    })
    return { images, labels, dim: full.dim, numClasses: full.numClasses }
  }
  throw new Error(`unknown dataset ${(spec as DatasetSpec).name}`)
}
