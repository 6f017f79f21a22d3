// C ABI surface; filled in after the core library stabilizes.
