/** Drives the diffusion engine (the Python package two directories up)
 * through the EMB1 interface: exported files must pass its validator and
 * support a file-direct diffusion-vs-random comparison.
 *
 * The full-size variant (n=10000, d=50, C=10, 10 query rounds) runs under
 * `npm run acceptance`; plain `npm test` exercises a small version.
 */

import assert from 'node:assert/strict'
import { spawnSync } from 'node:child_process'
import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'
import { test } from 'node:test'

import { exportEmbeddings } from '../src/export'

const REPO_ROOT = path.resolve(__dirname, '..', '..', '..')
const PYTHON_ENV = { ...process.env, PYTHONPATH: path.join(REPO_ROOT, 'src') }

function python(args: string[], timeoutMs = 600000) {
  return spawnSync('python3', args, {
    env: PYTHON_ENV,
    cwd: REPO_ROOT,
    encoding: 'utf-8',
    timeout: timeoutMs,
  })
}

function engineAvailable(): boolean {
  return python(['-c', 'import diffal']).status === 0
}

async function exportPair(dir: string, nTrain: number, nTest: number,
                          hidden: string, epochs: number, batchSize: number) {
  const pool = path.join(dir, 'pool.emb1')
  const testFile = path.join(dir, 'test.emb1')
  const modelDir = path.join(dir, 'model')
  const trainResult = await exportEmbeddings({
    dataset: { name: 'synthetic-digits', split: 'train', n: nTrain, balanced: true, seed: 0 },
    model: { kind: 'mlp', hidden: hidden.split(',').map(Number) },
    out: pool,
    epochs,
    batchSize,
    saveModelDir: modelDir,
  })
  // the held-out set must live in the same embedding space: reuse the model
  await exportEmbeddings({
    dataset: { name: 'synthetic-digits', split: 'test', n: nTest, balanced: true, seed: 0 },
    model: { kind: 'file', path: modelDir },
    out: testFile,
    epochs: 0,
    batchSize,
  })
  return { pool, testFile, trainResult }
}

function runComparison(dir: string, pool: string, testFile: string,
                       batch: number, budget: number) {
  const config = {
    dataset: { kind: 'emb1', path: pool },
    test: { kind: 'emb1', path: testFile },
    graph: { k: 10 },
    query: { criterion: 'diffusion', batch_size: batch,
             minibatch_size: Math.max(1, Math.floor(batch / 4)), diffusion_time: 5 },
    budget,
    init_per_class: 2,
    seeds: [0],
    embedding_source: 'file-direct',
  }
  const cfgPath = path.join(dir, 'cfg.json')
  fs.writeFileSync(cfgPath, JSON.stringify(config))
  const out = path.join(dir, 'results')
  return {
    result: python(['-m', 'diffal.cli', 'compare', '--config', cfgPath,
                    '--out', out, '--criteria', 'diffusion,random']),
    curves: path.join(out, 'curves.csv'),
  }
}

test('small export feeds the engine end to end', { timeout: 300000 }, async (t) => {
  if (!engineAvailable()) {
    t.skip('python diffusion engine not importable')
    return
  }
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'integration-'))
  const { pool, testFile } = await exportPair(dir, 400, 120, '32,16', 1, 16)

  const validate = python(['-c',
    `from diffal.data import load_embedding_file as L; ` +
    `a = L('${pool}'); b = L('${testFile}'); ` +
    `print(a.n, a.dim, a.num_classes, b.n)`])
  assert.equal(validate.status, 0, validate.stderr)
  assert.equal(validate.stdout.trim(), '400 16 10 120')

  const { result, curves } = runComparison(dir, pool, testFile, 10, 50)
  assert.equal(result.status, 0, result.stderr)
  const rows = fs.readFileSync(curves, 'utf-8').trim().split('\n')
  assert.equal(rows.length, 1 + 2 * 6)  // header + 2 criteria x (initial + 5 rounds)
})

test('full-size export (n=10000, d=50) drives a 10-round comparison', { timeout: 1800000 }, async (t) => {
  if (process.env.EXPORTER_FULL_ACCEPTANCE !== '1') {
    t.skip('set EXPORTER_FULL_ACCEPTANCE=1 (npm run acceptance)')
    return
  }
  if (!engineAvailable()) {
    t.skip('python diffusion engine not importable')
    return
  }
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'acceptance-'))
  const { pool, testFile, trainResult } = await exportPair(dir, 10000, 2000, '100,50', 2, 8)
  assert.deepEqual(trainResult, { n: 10000, dim: 50, numClasses: 10 })

  const validate = python(['-c',
    `from diffal.data import load_embedding_file as L; ` +
    `a = L('${pool}'); print(a.n, a.dim, a.num_classes)`])
  assert.equal(validate.status, 0, validate.stderr)
  assert.equal(validate.stdout.trim(), '10000 50 10')

  const { result, curves } = runComparison(dir, pool, testFile, 20, 200)
  assert.equal(result.status, 0, result.stderr)
  const rows = fs.readFileSync(curves, 'utf-8').trim().split('\n')
  assert.equal(rows.length, 1 + 2 * 11)  // header + 2 criteria x (initial + 10 rounds)
  console.log(result.stdout.trim())
})
