"""Exercise every binding once on a small synthetic problem."""

import os
import sys
import tempfile

import cpc_py


def main():
    train = cpc_py.Dataset.two_regime(120, 120, classes=3, dim=4, seed=1)
    test = cpc_py.Dataset.two_regime(60, 60, classes=3, dim=4, seed=2)
    assert len(train) == 240 and train.dim == 4 and train.class_count == 3

    fit, val, held = train.split(0.7, 0.15, 0.15, seed=3)
    assert len(fit) + len(val) + len(held) == len(train)

    white = cpc_py.Whitening.fit(train, 1e-6)
    assert white.apply(test).dim == 4
    assert len(cpc_py.normalize_samples(train).rows()) == len(train)

    row = train.rows()[5]
    assert cpc_py.neighbors(train, row, 1) == [5]

    for kind in ("softmax", "svm", "forest", "knn"):
        clf = cpc_py.Classifier.fit(train, kind, seed=4)
        report = cpc_py.evaluate(clf.predict_all(test), test.labels, 3)
        print(f"{kind:8s} accuracy {report['accuracy']:.3f}")

    mlp = cpc_py.Mlp("in:4 concat:8 fc:8 head:3", seed=5)
    trained, log = mlp.train(train, epochs=5, seed=6)
    assert trained.loss(train) < mlp.loss(train)
    assert trained.extract(test).dim == 8

    sweep = cpc_py.theta_sweep(fit, val, seed=7)
    model = cpc_py.Cpc.fit(train, theta=sweep["best_theta"], seed=7)
    route, label, margin = model.predict(test.rows()[0])
    assert route in "+-" and 0 <= label < 3 and -1.0 <= margin <= 1.0
    report = model.evaluate(test)
    print(f"cpc      accuracy {report['accuracy']:.3f} at theta {model.theta}")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cpc.json")
        model.save(path)
        assert cpc_py.Cpc.load(path).predict_all(test) == model.predict_all(test)

    cv = cpc_py.cross_validate(train, folds=5, theta=0.5, seed=8)
    assert len(cv["accuracies"]) == 5

    try:
        cpc_py.Classifier.fit(train, "boosting")
    except ValueError:
        pass
    else:
        sys.exit("unknown classifier was accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
