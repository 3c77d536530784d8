# pbesolve package
