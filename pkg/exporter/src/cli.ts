#!/usr/bin/env node
/** Command line:
 *
 *   emb1-export export --dataset mnist --n 10000 --balanced \
 *       --model mlp:100,50 --seed 0 --out pool.emb1 [--data-dir DIR] \
 *       [--split train|test] [--epochs 2] [--batch-size 8]
 *
 * Exit codes: 0 success, 1 usage/configuration problem, 2 runtime failure.
 */

import { DatasetUnavailableError } from './datasets'
import { exportEmbeddings, parseModelSpec } from './export'

interface Args {
  dataset: string
  n: number
  balanced: boolean
  model: string
  seed: number
  out: string
  split: 'train' | 'test'
  dataDir?: string
  epochs: number
  batchSize: number
  verbose: boolean
  saveModelDir?: string
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== 'export') {
    throw new UsageError(`unknown command '${argv[0] ?? ''}' (expected: export)`)
  }
  const args: Args = {
    dataset: 'synthetic-digits',
    n: 1000,
    balanced: false,
    model: 'mlp:100,50',
    seed: 0,
    out: '',
    split: 'train',
    epochs: 2,
    batchSize: 8,
    verbose: false,
  }
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i]
    const need = (): string => {
      const v = argv[++i]
      if (v === undefined) throw new UsageError(`${flag} needs a value`)
      return v
    }
    switch (flag) {
      case '--dataset': args.dataset = need(); break
      case '--n': args.n = parseInt(need(), 10); break
      case '--balanced': args.balanced = true; break
      case '--model': args.model = need(); break
      case '--seed': args.seed = parseInt(need(), 10); break
      case '--out': args.out = need(); break
      case '--split': args.split = need() as 'train' | 'test'; break
      case '--data-dir': args.dataDir = need(); break
      case '--epochs': args.epochs = parseInt(need(), 10); break
      case '--batch-size': args.batchSize = parseInt(need(), 10); break
      case '--save-model': args.saveModelDir = need(); break
      case '--verbose': args.verbose = true; break
      default:
        throw new UsageError(`unknown flag ${flag}`)
    }
  }
  if (!args.out) throw new UsageError('--out is required')
  if (!Number.isFinite(args.n) || args.n < 1) throw new UsageError('--n must be >= 1')
  if (args.dataset !== 'mnist' && args.dataset !== 'synthetic-digits') {
    throw new UsageError(`unknown dataset '${args.dataset}'`)
  }
  if (args.split !== 'train' && args.split !== 'test') {
    throw new UsageError(`--split must be train or test`)
  }
  return args
}

class UsageError extends Error {}

export async function main(argv: string[]): Promise<number> {
  let args: Args
  try {
    args = parseArgs(argv)
  } catch (err) {
    console.error(`emb1-export: ${(err as Error).message}`)
    return 1
  }
  try {
    const result = await exportEmbeddings({
      dataset: {
        name: args.dataset as 'mnist' | 'synthetic-digits',
        split: args.split,
        n: args.n,
        balanced: args.balanced,
        seed: args.seed,
        dataDir: args.dataDir,
      },
      model: parseModelSpec(args.model),
      out: args.out,
      epochs: args.epochs,
      batchSize: args.batchSize,
      verbose: args.verbose,
      saveModelDir: args.saveModelDir,
    })
    console.log(`wrote ${args.out} (n=${result.n}, d=${result.dim}, C=${result.numClasses})`)
    return 0
  } catch (err) {
    if (err instanceof DatasetUnavailableError) {
      console.error(`emb1-export: fetch error: ${(err as Error).message}`)
      return 2
    }
    console.error(`emb1-export: ${(err as Error).message}`)
    return 2
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
