"""Ten hand-enumerated (gold, pred) entity samples with their expected scores.

Per-sample (tp, fp, fn) and P/R/F1 were counted by hand:

  1  {a,b}       {a,b}       2 0 0   1     1     1
  2  {a,b,c}     {a,b,d}     2 1 1   2/3   2/3   2/3
  3  {a}         {}          0 0 1   0     0     0     (empty prediction)
  4  {a,b,c,d}   {a}         1 0 3   1     1/4   2/5
  5  {x}         {y,z}       0 2 1   0     0     0
  6  {a,b}       {a,b,c,d}   2 2 0   1/2   1     2/3
  7  {p,q,r}     {q}         1 0 2   1     1/3   1/2
  8  {m}         {m}         1 0 0   1     1     1
  9  {a..e}      {a,b,f}     2 1 3   2/3   2/5   1/2
 10  {s,t}       {}          0 0 2   0     0     0     (empty prediction)

macro P = 35/60, R = 93/200, F1 = 71/150
micro TP=11 FP=6 FN=13 -> P = 11/17, R = 11/24, F1 = 22/41
"""

SAMPLES = [
    ({"a", "b"}, {"a", "b"}),
    ({"a", "b", "c"}, {"a", "b", "d"}),
    ({"a"}, set()),
    ({"a", "b", "c", "d"}, {"a"}),
    ({"x"}, {"y", "z"}),
    ({"a", "b"}, {"a", "b", "c", "d"}),
    ({"p", "q", "r"}, {"q"}),
    ({"m"}, {"m"}),
    ({"a", "b", "c", "d", "e"}, {"a", "b", "f"}),
    ({"s", "t"}, set()),
]

COUNTS = [(2, 0, 0), (2, 1, 1), (0, 0, 1), (1, 0, 3), (0, 2, 1),
          (2, 2, 0), (1, 0, 2), (1, 0, 0), (2, 1, 3), (0, 0, 2)]

MACRO = {"precision": 0.5833, "recall": 0.4650, "f1": 0.4733}
MICRO = {"precision": 0.6471, "recall": 0.4583, "f1": 0.5366, "tp": 11, "fp": 6, "fn": 13}

# two-sample divergence case: a perfect singleton and a total miss on three gold entities
DIVERGENCE = [({"a"}, {"a"}), ({"b", "c", "d"}, set())]
