# mwdml tests
