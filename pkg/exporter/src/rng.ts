/** Small seeded PRNG (splitmix-style) so every draw is reproducible. */
export class Rng {
  private state: number

  constructor(seed: number) {
    this.state = seed >>> 0
  }

  /** uniform float in [0, 1) */
  next(): number {
    this.state = (this.state + 0x9e3779b9) >>> 0
    let z = this.state
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad)
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97)
    z = (z ^ (z >>> 15)) >>> 0
    return z / 0x100000000
  }

  /** uniform integer in [0, bound) */
  int(bound: number): number {
    return Math.floor(this.next() * bound)
  }

  /** standard normal via Box-Muller */
  normal(): number {
    const u = Math.max(this.next(), 1e-12)
    const v = this.next()
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v)
  }

  /** k distinct indices from [0, n), order randomized */
  sampleWithoutReplacement(n: number, k: number): number[] {
    if (k > n) {
      throw new Error(`cannot draw ${k} distinct values from ${n}`)
    }
    const pool = new Array<number>(n)
    for (let i = 0; i < n; i++) pool[i] = i
    for (let i = 0; i < k; i++) {
      const j = i + this.int(n - i)
      const tmp = pool[i]
      pool[i] = pool[j]
      pool[j] = tmp
    }
    return pool.slice(0, k)
  }
}
