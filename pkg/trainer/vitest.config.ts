import { defineConfig } from 'vitest/config';

// Training tests are CPU-bound; running files in parallel would just
// contend for the same cores and skew the timed assertions.
export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    fileParallelism: false,
    testTimeout: 300_000,
    hookTimeout: 120_000,
  },
});
