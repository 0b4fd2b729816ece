from pytorch_mpdbm.optimizer.sgd import MaxNormSGD, max_norm_project, sgd_step
