"""Fixed DSA domain parameters (3072-bit p, 256-bit q) shared by every
finite-field identity. Generated once with OpenSSL; embedding them keeps
key generation cheap and lets seeded identities be reproducible."""

P = int(
    "f99c8f0f288ae6a314a6ff6abfdf45992adf6b83ef8ebe9b13a9ba260e561b62"
    "e38933f0ca32bd8f7be27e6988fd31403ffa10cc53add027a5324e8cb6fc2433"
    "db38a3e0d6ba8f37ccdca15f8d74a3443f234d5b5b4bc506f33202efe63daf0a"
    "151eb9b9b5fdb816533a920caa81eb10f3c2748c0c6466186c7c1f8d496f6482"
    "ed5602d625b21b8b1f87cd208e3235b38b5832a5cef78442814b9617b076f6fa"
    "590f6451150a7d1c0609e8a6b7bf7a8b397c649c1f2c61916bb50da5b452d5c7"
    "12671f64c8e51a0af5ecd9eaa9a02f24f283a8b7b1b41736a9402bf651c358ee"
    "6d65c229c5cea6504174985bc106c01f3a250aaf3f549f860b51af86ed04d048"
    "1009976d043b8415867f172ab16dcea9811aa4a6a00ef8d510893b96d9b68d06"
    "9be156e6c9ffad95a7c3df03eac5e2de00b51338af18bfe002e8d929e0f1bcae"
    "c27dc8405e7b0982d16323ea7330b44129a4eaf42035b4553a3585609896e45d"
    "5a2032b563f0167a26c6fdc2038cc63ba38538aaf67320169a2baa45244a006b",
    16,
)

Q = int(
    "b5a1c262543faf781fcbf0ec2e9a2a3995b7c06e396365445d3a71c06907dfab",
    16,
)

G = int(
    "2003603ff58010399c6ccc8ef850584d1f666e7b14064668814af05d06cd3932"
    "4b4d9790328f268e7fbaad8869653171cde4532b8a8d9aef1d0a7026eb88ffcc"
    "c4272b4de6f250645bb37ade03a0cc6418ccacb20fa77f26bf66cef00ef5ca3c"
    "ec6a7f555b0a376baae6ef6f321c71d866fefc74f0fab6aa42247da1a8c6f6a8"
    "67dc428b97143c5b8100dfff0398b2812b629a66eb4122a6df2e3b46e8a70767"
    "cb20a3f0568ee395d1e97e157c90a49a4e20c75535e789a542d61b34df8d2e63"
    "ea4d4bb2a87fa995efb178a64fbdefee4ac11f9b9398af2e32d115c823cd1a2a"
    "36b04f87920a9f84bdc8be81211e6ce78341a59b934f433efeb9a20a874ef893"
    "7a9813021364bca40238cba3380a58a2dfce0edf2e623375bd30c657a5f93f3d"
    "8bf9619b0796d6518d319215a06f93f984c8bd9dc17f33f51c626cc74dadd234"
    "0e2f429959fc2b1178cbc6b1055e417786c810a45a86b2b8ee7f8b1efca615c7"
    "1aac052146bcb327a7392a8ab88f1d9992780dcf51b583799c8f6aa6d07304af",
    16,
)
