import assert from 'node:assert/strict'
import { test } from 'node:test'
import * as zlib from 'node:zlib'

import { decodeIdxImages, decodeIdxLabels, encodeIdxImages, encodeIdxLabels } from '../src/idx'

function fixtureImages() {
  return {
    count: 3,
    rows: 2,
    cols: 2,
    pixels: Uint8Array.from([0, 255, 10, 20, 1, 2, 3, 4, 9, 8, 7, 6]),
  }
}

test('image round trip', () => {
  const images = decodeIdxImages(encodeIdxImages(fixtureImages()))
  assert.equal(images.count, 3)
  assert.equal(images.rows, 2)
  assert.deepEqual(Array.from(images.pixels.slice(0, 4)), [0, 255, 10, 20])
})

test('label round trip', () => {
  const labels = decodeIdxLabels(encodeIdxLabels(Uint8Array.from([3, 1, 4])))
  assert.deepEqual(Array.from(labels), [3, 1, 4])
})

test('gzipped payloads are detected by content', () => {
  const gz = zlib.gzipSync(encodeIdxImages(fixtureImages()))
  const images = decodeIdxImages(gz)
  assert.equal(images.count, 3)
})

test('bad magic rejected', () => {
  const buf = encodeIdxImages(fixtureImages())
  buf.writeUInt32BE(0xdead, 0)
  assert.throws(() => decodeIdxImages(buf), /magic/)
  assert.throws(() => decodeIdxLabels(encodeIdxImages(fixtureImages())), /magic/)
})

test('size mismatch rejected', () => {
  const buf = encodeIdxImages(fixtureImages())
  assert.throws(() => decodeIdxImages(buf.subarray(0, buf.length - 1)), /expected/)
})
