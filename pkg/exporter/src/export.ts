/** The export pipeline: dataset subset -> classifier -> penultimate
 * activations -> EMB1 file. */

import * as tf from '@tensorflow/tfjs'

import { DatasetSpec, loadSubset } from './datasets'
import { EmbeddingSet, writeEmb1 } from './emb1'
import {
  buildMlp,
  embeddingWidth,
  loadModel,
  penultimateFeatures,
  saveModel,
  trainModel,
} from './model'

export interface ModelSpec {
  kind: 'mlp' | 'file'
  hidden?: number[]
  path?: string
}

export function parseModelSpec(spec: string): ModelSpec {
  if (spec.startsWith('mlp:')) {
    const hidden = spec.slice(4).split(',').map((s) => {
      const v = parseInt(s, 10)
      if (!Number.isFinite(v) || v < 1) throw new Error(`bad hidden width '${s}'`)
      return v
    })
    if (hidden.length === 0) throw new Error('mlp spec needs at least one hidden width')
    return { kind: 'mlp', hidden }
  }
  if (spec.startsWith('file:')) {
    return { kind: 'file', path: spec.slice(5) }
  }
  throw new Error(`unknown model spec '${spec}' (use mlp:W1,W2 or file:DIR)`)
}

export interface ExportSpec {
  dataset: DatasetSpec
  model: ModelSpec
  out: string
  epochs: number
  batchSize: number
  verbose?: boolean
  /** save the (possibly freshly trained) model here, for frozen re-use */
  saveModelDir?: string
}

export interface ExportResult {
  n: number
  dim: number
  numClasses: number
  trainAccuracy?: number
}

export async function exportEmbeddings(spec: ExportSpec): Promise<ExportResult> {
  const data = loadSubset(spec.dataset)
  let model: tf.LayersModel
  if (spec.model.kind === 'mlp') {
    const mlp = buildMlp(data.dim, spec.model.hidden ?? [100, 50], data.numClasses,
                         spec.dataset.seed)
    await trainModel(mlp, data.images, data.labels, data.dim, data.numClasses, {
      epochs: spec.epochs,
      batchSize: spec.batchSize,
      seed: spec.dataset.seed,
      verbose: spec.verbose,
    })
    model = mlp
  } else {
    model = await loadModel(spec.model.path as string)
    const inputDim = (model.inputs[0].shape[1] ?? 0) as number
    if (inputDim !== data.dim) {
      throw new Error(
        `export aborted: model expects input width ${inputDim}, dataset has ${data.dim}`
      )
    }
    const outWidth = (model.outputs[0].shape[1] ?? 0) as number
    if (outWidth !== data.numClasses) {
      throw new Error(
        `export aborted: model emits ${outWidth} classes, dataset has ${data.numClasses}`
      )
    }
  }
  const seq = model as tf.Sequential
  if (spec.saveModelDir) {
    await saveModel(seq, spec.saveModelDir)
  }
  const width = embeddingWidth(seq)
  const features = penultimateFeatures(seq, data.images, data.dim)
  const set: EmbeddingSet = {
    vectors: features,
    labels: Int32Array.from(data.labels),
    numClasses: data.numClasses,
    dim: width,
  }
  writeEmb1(set, spec.out)
  return { n: data.labels.length, dim: width, numClasses: data.numClasses }
}
