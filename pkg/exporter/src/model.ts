/** Classifier plumbing: a small fully-connected net whose last hidden layer
 * is the embedding the exporter dumps. */

import * as fs from 'fs'
import * as path from 'path'

import * as tf from '@tensorflow/tfjs'

export interface TrainOptions {
  epochs: number
  batchSize: number
  seed: number
  learningRate?: number
  verbose?: boolean
}

export function buildMlp(inputDim: number, hidden: number[], numClasses: number,
                         seed: number): tf.Sequential {
  const model = tf.sequential()
  hidden.forEach((units, i) => {
    model.add(tf.layers.dense({
      units,
      activation: 'relu',
      inputShape: i === 0 ? [inputDim] : undefined,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed * 31 + i }),
      biasInitializer: 'zeros',
    }))
  })
  model.add(tf.layers.dense({
    units: numClasses,
    activation: 'softmax',
    kernelInitializer: tf.initializers.glorotUniform({ seed: seed * 31 + hidden.length }),
    biasInitializer: 'zeros',
  }))
  return model
}

/** Training with a seeded shuffle (fit itself runs with shuffle off) so the
 * resulting parameters are reproducible. */
export async function trainModel(model: tf.Sequential, images: Float32Array,
                                 labels: Uint8Array, dim: number, numClasses: number,
                                 options: TrainOptions): Promise<void> {
  const n = labels.length
  const order = new Array<number>(n)
  for (let i = 0; i < n; i++) order[i] = i
  // one fixed permutation; epochs revisit it, which keeps fit() deterministic
  let state = options.seed >>> 0
  for (let i = n - 1; i > 0; i--) {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0
    const j = state % (i + 1)
    const tmp = order[i]
    order[i] = order[j]
    order[j] = tmp
  }
  const shuffled = new Float32Array(n * dim)
  const onehot = new Float32Array(n * numClasses)
  order.forEach((src, dst) => {
    shuffled.set(images.subarray(src * dim, (src + 1) * dim), dst * dim)
    onehot[dst * numClasses + labels[src]] = 1
  })
  const x = tf.tensor2d(shuffled, [n, dim])
  const y = tf.tensor2d(onehot, [n, numClasses])
  model.compile({
    optimizer: tf.train.adam(options.learningRate ?? 0.001),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  })
  try {
    await model.fit(x, y, {
      epochs: options.epochs,
      batchSize: options.batchSize,
      shuffle: false,
      verbose: options.verbose ? 1 : 0,
    })
  } finally {
    x.dispose()
    y.dispose()
  }
}

/** Penultimate-layer activations, computed in batches. */
export function penultimateFeatures(model: tf.Sequential, images: Float32Array,
                                    dim: number, batch = 256): Float32Array {
  const layers = model.layers
  if (layers.length < 2) {
    throw new Error('model needs at least one hidden layer to expose an embedding')
  }
  const embed = tf.model({
    inputs: model.inputs,
    outputs: layers[layers.length - 2].output as tf.SymbolicTensor,
  })
  const n = images.length / dim
  const width = (embed.outputs[0].shape[1] ?? 0) as number
  const out = new Float32Array(n * width)
  for (let start = 0; start < n; start += batch) {
    const stop = Math.min(start + batch, n)
    const slice = tf.tensor2d(images.subarray(start * dim, stop * dim), [stop - start, dim])
    const feats = embed.predict(slice) as tf.Tensor
    out.set(feats.dataSync() as Float32Array, start * width)
    slice.dispose()
    feats.dispose()
  }
  return out
}

export function embeddingWidth(model: tf.Sequential): number {
  const layer = model.layers[model.layers.length - 2]
  const shape = layer.outputShape as number[]
  return shape[shape.length - 1]
}

/** Minimal disk round-trip for LayersModel without tfjs-node's file:// handler. */
export async function saveModel(model: tf.Sequential, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true })
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    fs.writeFileSync(path.join(dir, 'topology.json'), JSON.stringify({
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
    }))
    const data = artifacts.weightData as ArrayBuffer
    fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(data))
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
  }))
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const meta = JSON.parse(fs.readFileSync(path.join(dir, 'topology.json'), 'utf-8'))
  const weights = fs.readFileSync(path.join(dir, 'weights.bin'))
  return tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: meta.modelTopology,
    weightSpecs: meta.weightSpecs,
    weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
  }))
}
