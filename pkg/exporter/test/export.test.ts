import assert from 'node:assert/strict'
import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'
import { test } from 'node:test'

import { generateSyntheticDigits } from '../src/datasets'
import { readEmb1 } from '../src/emb1'
import { exportEmbeddings, parseModelSpec } from '../src/export'
import { buildMlp, loadModel, penultimateFeatures, saveModel, trainModel } from '../src/model'

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), 'export-'))
}

test('parseModelSpec', () => {
  assert.deepEqual(parseModelSpec('mlp:100,50'), { kind: 'mlp', hidden: [100, 50] })
  assert.deepEqual(parseModelSpec('file:/x/y'), { kind: 'file', path: '/x/y' })
  assert.throws(() => parseModelSpec('cnn:3'), /unknown model spec/)
  assert.throws(() => parseModelSpec('mlp:abc'), /bad hidden width/)
})

test('small synthetic export has the declared shape', async () => {
  const out = path.join(tmpdir(), 'small.emb1')
  const result = await exportEmbeddings({
    dataset: { name: 'synthetic-digits', split: 'train', n: 120, balanced: true, seed: 4 },
    model: { kind: 'mlp', hidden: [24, 12] },
    out,
    epochs: 1,
    batchSize: 16,
  })
  assert.deepEqual(result, { n: 120, dim: 12, numClasses: 10 })
  const set = readEmb1(out)
  assert.equal(set.labels.length, 120)
  assert.equal(set.dim, 12)
  assert.equal(set.numClasses, 10)
  const counts = new Array(10).fill(0)
  for (const y of set.labels) counts[y]++
  assert.deepEqual(counts, new Array(10).fill(12))
  for (const v of set.vectors) assert.ok(Number.isFinite(v))
})

test('re-export with the same seed reproduces header and labels', async () => {
  const dir = tmpdir()
  const blobs: Buffer[] = []
  for (const name of ['a.emb1', 'b.emb1']) {
    await exportEmbeddings({
      dataset: { name: 'synthetic-digits', split: 'train', n: 60, balanced: true, seed: 9 },
      model: { kind: 'mlp', hidden: [16, 8] },
      out: path.join(dir, name),
      epochs: 1,
      batchSize: 8,
    })
    blobs.push(fs.readFileSync(path.join(dir, name)))
  }
  const [a, b] = blobs
  assert.deepEqual(a.subarray(0, 16), b.subarray(0, 16))           // header
  assert.deepEqual(a.subarray(a.length - 60 * 4), b.subarray(b.length - 60 * 4))  // labels
})

test('frozen model makes the float payload identical', async () => {
  const dir = tmpdir()
  const data = generateSyntheticDigits(40, 2, true)
  const mlp = buildMlp(data.dim, [16, 8], 10, 5)
  await trainModel(mlp, data.images, data.labels, data.dim, 10,
                   { epochs: 1, batchSize: 8, seed: 5 })
  await saveModel(mlp, path.join(dir, 'model'))

  const outs: Buffer[] = []
  for (const name of ['x.emb1', 'y.emb1']) {
    await exportEmbeddings({
      dataset: { name: 'synthetic-digits', split: 'train', n: 40, balanced: true, seed: 2 },
      model: { kind: 'file', path: path.join(dir, 'model') },
      out: path.join(dir, name),
      epochs: 0,
      batchSize: 8,
    })
    outs.push(fs.readFileSync(path.join(dir, name)))
  }
  assert.deepEqual(outs[0], outs[1])  // byte-identical, floats included

  // and the reloaded model computes the same features as the original
  const reloaded = await loadModel(path.join(dir, 'model'))
  const a = penultimateFeatures(mlp, data.images, data.dim)
  const b = penultimateFeatures(reloaded as never, data.images, data.dim)
  assert.deepEqual(Array.from(a), Array.from(b))
})

test('loaded model with mismatched width aborts the export', async () => {
  const dir = tmpdir()
  const mlp = buildMlp(16, [8, 4], 10, 0)  // expects 4x4 inputs, not 28x28
  await saveModel(mlp, path.join(dir, 'model'))
  await assert.rejects(
    exportEmbeddings({
      dataset: { name: 'synthetic-digits', split: 'train', n: 20, balanced: false, seed: 0 },
      model: { kind: 'file', path: path.join(dir, 'model') },
      out: path.join(dir, 'nope.emb1'),
      epochs: 0,
      batchSize: 8,
    }),
    /export aborted/,
  )
})
